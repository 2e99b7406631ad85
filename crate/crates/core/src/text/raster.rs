//! Font loading and text rasterization into premultiplied RGBA textures.

use std::path::Path;

use ab_glyph::{point, Font, FontArc, GlyphId, PxScale, ScaleFont};
use image::RgbaImage;
use serde::{Deserialize, Serialize};

use super::corpus::{TextContent, TextStructure, MAX_PARAGRAPH_LINES};
use super::TextError;

/// Smallest glyph height (ascent to descent) text is ever set at.
pub const MIN_GLYPH_HEIGHT: f64 = 16.0;
/// Baseline-to-baseline distance as a multiple of glyph height.
pub const LINE_SPACING: f64 = 1.2;
/// Horizontal margin left free inside the texture, in pixels.
pub const MARGIN: f64 = 4.0;
/// Each shrink-to-fit step scales the glyph height by this factor.
const SHRINK: f64 = 0.9;

/// DejaVu Sans, bundled so demos and tests need no system fonts.
pub const EMBEDDED_FONT: &[u8] = include_bytes!("../../assets/fonts/DejaVuSans.ttf");

#[derive(Debug, Clone)]
pub struct LoadedFont {
    pub name: String,
    pub font: FontArc,
}

#[derive(Debug, Clone)]
pub struct FontLibrary {
    fonts: Vec<LoadedFont>,
}

impl FontLibrary {
    pub fn embedded() -> Self {
        FontLibrary {
            fonts: vec![LoadedFont {
                name: "DejaVuSans".into(),
                font: FontArc::try_from_slice(EMBEDDED_FONT).expect("bundled font parses"),
            }],
        }
    }

    /// Loads every `.ttf`/`.otf` file in `dir`, sorted by file name so font
    /// ids are stable.
    pub fn load_dir(dir: &Path) -> Result<Self, TextError> {
        let io = |source| TextError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if matches!(ext.as_deref(), Some("ttf" | "otf")) {
                paths.push(path);
            }
        }
        paths.sort();
        let mut fonts = Vec::with_capacity(paths.len());
        for path in paths {
            let bytes = std::fs::read(&path).map_err(|source| TextError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let font = FontArc::try_from_vec(bytes).map_err(|e| TextError::Font {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("font").to_string();
            fonts.push(LoadedFont { name, font });
        }
        if fonts.is_empty() {
            return Err(TextError::NoFonts(dir.display().to_string()));
        }
        Ok(FontLibrary { fonts })
    }

    pub fn len(&self) -> usize {
        self.fonts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fonts.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&LoadedFont> {
        self.fonts.get(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStyle {
    pub font: usize,
    /// Nominal ascent-to-descent height in pixels; shrunk to fit.
    pub glyph_height: f64,
    pub color: [u8; 3],
}

/// Axis-aligned box `[x0, y0, x1, y1]` in texture pixels.
pub type PixelBox = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharBox {
    pub ch: char,
    pub bbox: PixelBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBox {
    /// Text as sampled from the corpus.
    pub text: String,
    /// False when some character had no glyph and was drawn as `?`.
    pub renderable: bool,
    pub line: usize,
    pub bbox: PixelBox,
    pub chars: Vec<CharBox>,
}

#[derive(Debug, Clone)]
pub struct TextTexture {
    /// Premultiplied RGBA.
    pub rgba: RgbaImage,
    pub words: Vec<WordBox>,
    /// Per texel: 0 for no ink, otherwise 1 + index of the word owning it.
    pub owner: Vec<u16>,
    /// Glyph height actually used after shrinking.
    pub glyph_height: f64,
    pub lines: Vec<String>,
}

impl TextTexture {
    pub fn width(&self) -> u32 {
        self.rgba.width()
    }

    pub fn height(&self) -> u32 {
        self.rgba.height()
    }

    pub fn alpha(&self, x: u32, y: u32) -> u8 {
        self.rgba.get_pixel(x, y).0[3]
    }
}

struct PlacedChar {
    glyph: ab_glyph::Glyph,
    word: usize,
    ch: char,
    cell: (f64, f64),
}

struct Layout {
    chars: Vec<PlacedChar>,
    words: Vec<(String, bool, usize)>,
    line_bands: Vec<(f64, f64)>,
    lines: Vec<String>,
}

fn glyph_for(font: &FontArc, c: char) -> (GlyphId, char, bool) {
    let id = font.glyph_id(c);
    if id.0 != 0 {
        (id, c, true)
    } else {
        (font.glyph_id('?'), '?', false)
    }
}

fn measure(font: &FontArc, scale: PxScale, text: &str) -> f64 {
    let scaled = font.as_scaled(scale);
    let mut pen = 0.0f32;
    let mut prev: Option<GlyphId> = None;
    for c in text.chars() {
        let (id, _, _) = glyph_for(font, c);
        if let Some(p) = prev {
            pen += scaled.kern(p, id);
        }
        pen += scaled.h_advance(id);
        prev = Some(id);
    }
    pen as f64
}

/// Lines to set at glyph height `gh`, or `None` when a paragraph needs more
/// than the allowed number of lines.
fn arrange_lines(content: &TextContent, font: &FontArc, gh: f64, max_width: f64) -> Option<Vec<String>> {
    if content.structure != TextStructure::Paragraph {
        return Some(content.lines.clone());
    }
    let scale = PxScale::from(gh as f32);
    let space = measure(font, scale, " ");
    let mut lines: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut cur_w = 0.0;
    for w in content.words() {
        let ww = measure(font, scale, w);
        if !cur.is_empty() && cur_w + space + ww > max_width {
            lines.push(std::mem::take(&mut cur));
            cur_w = 0.0;
        }
        if !cur.is_empty() {
            cur.push(' ');
            cur_w += space;
        }
        cur.push_str(w);
        cur_w += ww;
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    (lines.len() <= MAX_PARAGRAPH_LINES).then_some(lines)
}

/// Lays out all lines centred in a `w x h` texture; `None` if anything
/// (advance or ink) would leave the texture.
fn layout(content: &TextContent, font: &FontArc, gh: f64, w: f64, h: f64) -> Option<Layout> {
    let max_width = w - MARGIN;
    let lines = arrange_lines(content, font, gh, max_width)?;
    let scale = PxScale::from(gh as f32);
    let scaled = font.as_scaled(scale);
    let ascent = scaled.ascent() as f64;
    let descent = scaled.descent() as f64;
    let block_h = (lines.len() as f64 - 1.0) * LINE_SPACING * gh + (ascent - descent);
    if block_h > h {
        return None;
    }
    let top = (h - block_h) / 2.0;
    let mut out = Layout {
        chars: Vec::new(),
        words: Vec::new(),
        line_bands: Vec::new(),
        lines: lines.clone(),
    };
    for (li, line) in lines.iter().enumerate() {
        let width = measure(font, scale, line);
        if width > max_width {
            return None;
        }
        let line_top = top + li as f64 * LINE_SPACING * gh;
        let baseline = line_top + ascent;
        out.line_bands.push((line_top, baseline - descent));
        let mut pen = (w - width) / 2.0;
        let mut prev: Option<GlyphId> = None;
        let mut in_word = false;
        // Index of the previous glyph in the current word; its cell ends
        // where the kerned next glyph starts so cells tile the word.
        let mut last: Option<usize> = None;
        for c in line.chars() {
            if c.is_whitespace() {
                in_word = false;
                last = None;
            } else if !in_word {
                out.words.push((String::new(), true, li));
                in_word = true;
            }
            let (id, drawn, ok) = glyph_for(font, c);
            if let Some(p) = prev {
                pen += scaled.kern(p, id) as f64;
            }
            if let Some(i) = last {
                out.chars[i].cell.1 = pen;
            }
            let advance = scaled.h_advance(id) as f64;
            if in_word {
                let word = out.words.len() - 1;
                out.words[word].0.push(c);
                out.words[word].1 &= ok;
                let glyph = id.with_scale_and_position(scale, point(pen as f32, baseline as f32));
                if let Some(outline) = font.outline_glyph(glyph.clone()) {
                    let b = outline.px_bounds();
                    if b.min.x < 0.0 || b.min.y < 0.0 || b.max.x as f64 > w || b.max.y as f64 > h {
                        return None;
                    }
                }
                out.chars.push(PlacedChar {
                    glyph,
                    word,
                    ch: drawn,
                    cell: (pen, pen + advance),
                });
                last = Some(out.chars.len() - 1);
            }
            pen += advance;
            prev = Some(id);
        }
    }
    Some(out)
}

/// Sets `content` into a transparent `width x height` texture, shrinking the
/// glyph height from the nominal style value until everything fits.
pub fn rasterize_text(
    content: &TextContent,
    style: &TextStyle,
    fonts: &FontLibrary,
    width: u32,
    height: u32,
) -> Result<TextTexture, TextError> {
    let font = &fonts.get(style.font).ok_or(TextError::UnknownFont(style.font))?.font;
    if !(style.glyph_height >= MIN_GLYPH_HEIGHT) {
        return Err(TextError::Style(format!(
            "glyph height {} is below the {MIN_GLYPH_HEIGHT} px floor",
            style.glyph_height
        )));
    }
    if content.words().next().is_none() {
        return Err(TextError::Style("no words to render".into()));
    }
    let (w, h) = (width as f64, height as f64);
    let mut gh = style.glyph_height;
    let placed = loop {
        if let Some(l) = layout(content, font, gh, w, h) {
            break (l, gh);
        }
        if gh <= MIN_GLYPH_HEIGHT {
            return Err(TextError::RegionTooSmall { width, height });
        }
        gh = (gh * SHRINK).max(MIN_GLYPH_HEIGHT);
    };
    let (layout, gh) = placed;

    let n = width as usize * height as usize;
    let mut coverage = vec![0f32; n];
    let mut owner = vec![0u16; n];
    let mut owner_cov = vec![0f32; n];
    let mut char_boxes: Vec<Vec<CharBox>> = vec![Vec::new(); layout.words.len()];
    let mut word_boxes: Vec<Option<PixelBox>> = vec![None; layout.words.len()];
    let union = |a: Option<PixelBox>, b: PixelBox| match a {
        None => b,
        Some(a) => [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])],
    };
    for pc in &layout.chars {
        let band = layout.line_bands[layout.words[pc.word].2];
        let mut ybox = (band.0, band.1);
        if let Some(outline) = font.outline_glyph(pc.glyph.clone()) {
            let b = outline.px_bounds();
            ybox = (b.min.y as f64, b.max.y as f64);
            word_boxes[pc.word] = Some(union(
                word_boxes[pc.word],
                [b.min.x as f64, b.min.y as f64, b.max.x as f64, b.max.y as f64],
            ));
            let (ox, oy) = (b.min.x as i64, b.min.y as i64);
            outline.draw(|x, y, c| {
                let (px, py) = (ox + x as i64, oy + y as i64);
                if c <= 0.0 || px < 0 || py < 0 || px >= width as i64 || py >= height as i64 {
                    return;
                }
                let i = py as usize * width as usize + px as usize;
                let c = c.min(1.0);
                coverage[i] = 1.0 - (1.0 - coverage[i]) * (1.0 - c);
                if c > owner_cov[i] {
                    owner_cov[i] = c;
                    owner[i] = pc.word as u16 + 1;
                }
            });
        }
        let cell = [pc.cell.0, ybox.0, pc.cell.1, ybox.1];
        char_boxes[pc.word].push(CharBox { ch: pc.ch, bbox: cell });
        word_boxes[pc.word] = Some(union(word_boxes[pc.word], cell));
    }

    let mut rgba = RgbaImage::new(width, height);
    for (i, p) in rgba.pixels_mut().enumerate() {
        let a = coverage[i];
        if a > 0.0 {
            let c = style.color.map(|v| (v as f32 * a).round() as u8);
            p.0 = [c[0], c[1], c[2], (a * 255.0).round() as u8];
        }
    }
    // Texels whose coverage rounds to zero alpha own nothing.
    for (i, p) in rgba.pixels().enumerate() {
        if p.0[3] == 0 {
            owner[i] = 0;
        }
    }
    let clamp = |b: PixelBox| [b[0].max(0.0), b[1].max(0.0), b[2].min(w), b[3].min(h)];
    let words = layout
        .words
        .into_iter()
        .zip(char_boxes)
        .zip(word_boxes)
        .map(|(((text, renderable, line), chars), bbox)| WordBox {
            text,
            renderable,
            line,
            bbox: clamp(bbox.expect("every word has at least one character")),
            chars,
        })
        .collect();
    Ok(TextTexture {
        rgba,
        words,
        owner,
        glyph_height: gh,
        lines: layout.lines,
    })
}
