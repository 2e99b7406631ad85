//! Text content sampling, rasterization and colour choice.

mod color;
mod corpus;
mod raster;

use thiserror::Error;

pub use color::{delta_e, mean_color, pick_for_mean, pick_text_color, srgb_to_lab, CANDIDATES, MIN_DELTA_E, PALETTE};
pub use corpus::{sample_text, wrap_words, Corpus, TextContent, TextStructure, MAX_LINES, MAX_PARAGRAPH_LINES};
pub use raster::{
    rasterize_text, CharBox, FontLibrary, LoadedFont, PixelBox, TextStyle, TextTexture, WordBox, EMBEDDED_FONT,
    LINE_SPACING, MARGIN, MIN_GLYPH_HEIGHT,
};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("corpus contains no words")]
    EmptyCorpus,
    #[error("no .ttf or .otf fonts in {0}")]
    NoFonts(String),
    #[error("font id {0} is not loaded")]
    UnknownFont(usize),
    #[error("cannot parse font {path}: {message}")]
    Font { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid text style: {0}")]
    Style(String),
    #[error("region {width}x{height} is too small for the text")]
    RegionTooSmall { width: u32, height: u32 },
}
