//! File formats for scenes, matches, descriptors, label maps, rasters and results.
//!
//! Text formats are line oriented with single-space separated fields and a
//! version header. Reals are written in the shortest form that parses back
//! to the identical `f64`, so write → read → write is byte-stable.

mod descriptors;
mod images;
mod matches;
mod results;
mod scene;

pub use descriptors::{read_descriptors, write_descriptors, DESCRIPTOR_MAGIC};
pub use images::{
    check_dimensions, read_labelmap, read_mask, read_palette, read_raster, write_labelmap, write_mask,
    write_palette, write_raster, PALETTE_HEADER,
};
pub use matches::{image_sizes, read_matches, write_matches, ImageSizes, MATCHES_HEADER};
pub use results::{read_results, write_results, ResultRecord, RESULTS_HEADER};
pub use scene::{read_scene, write_scene, SCENE_HEADER};

use std::fmt::Display;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{}: file not found", .path.display())]
    MissingFile { path: PathBuf },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: byte {offset}: {message}", .path.display())]
    Decode {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("{}: expected {expected:?} pixels, found {found:?}", .path.display())]
    DimensionMismatch {
        path: PathBuf,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("{}: cannot write: {message}", .path.display())]
    Unwritable { path: PathBuf, message: String },
}

impl DataError {
    /// Line (text formats) or byte offset (binary formats) of the problem, if any.
    pub fn position(&self) -> Option<u64> {
        match self {
            DataError::Parse { line, .. } => Some(*line as u64),
            DataError::Decode { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> DataError {
    if source.kind() == std::io::ErrorKind::NotFound {
        DataError::MissingFile {
            path: path.to_owned(),
        }
    } else {
        DataError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub(crate) fn unwritable(path: &Path, message: impl Into<String>) -> DataError {
    DataError::Unwritable {
        path: path.to_owned(),
        message: message.into(),
    }
}

/// Shortest round-trip decimal form of a finite real.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

/// Ids are non-empty and free of whitespace and control characters.
pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(|c| c.is_whitespace() || c.is_control())
}

/// Cursor over the lines of a text file, tracking 1-based line numbers.
pub(crate) struct TextReader<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Split<'a, char>>,
    remaining: usize,
}

impl<'a> TextReader<'a> {
    /// Splits `text` into lines. The text must end with a newline.
    pub fn new(path: &'a Path, text: &'a str) -> Result<Self, DataError> {
        let Some(body) = text.strip_suffix('\n') else {
            let line = text.split('\n').count();
            return Err(DataError::Parse {
                path: path.to_owned(),
                line,
                message: "missing final newline".into(),
            });
        };
        Ok(Self {
            path,
            remaining: body.split('\n').count(),
            lines: body.split('\n').enumerate(),
        })
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Next line with its number and single-space separated fields.
    pub fn next_line(&mut self) -> Option<(usize, &'a str, Vec<&'a str>)> {
        let (i, line) = self.lines.next()?;
        self.remaining -= 1;
        Some((i + 1, line, line.split(' ').collect()))
    }

    pub fn error(&self, line: usize, message: impl Display) -> DataError {
        DataError::Parse {
            path: self.path.to_owned(),
            line,
            message: message.to_string(),
        }
    }

    pub fn expect_header(&mut self, header: &str) -> Result<(), DataError> {
        match self.next_line() {
            Some((_, l, _)) if l == header => Ok(()),
            Some((n, l, _)) => Err(self.error(n, format!("expected header '{header}', found '{l}'"))),
            None => Err(self.error(1, format!("expected header '{header}'"))),
        }
    }

    pub fn check_fields(
        &self,
        line: usize,
        fields: &[&str],
        allowed: std::ops::RangeInclusive<usize>,
    ) -> Result<(), DataError> {
        if fields.iter().any(|f| f.is_empty()) {
            return Err(self.error(line, "fields must be separated by single spaces"));
        }
        if !allowed.contains(&fields.len()) {
            return Err(self.error(
                line,
                format!(
                    "expected {}..={} fields, found {}",
                    allowed.start(),
                    allowed.end(),
                    fields.len()
                ),
            ));
        }
        Ok(())
    }

    pub fn real(&self, line: usize, name: &str, field: &str) -> Result<f64, DataError> {
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(line, format!("{name}: invalid real '{field}'"))),
        }
    }

    pub fn integer<T: std::str::FromStr>(
        &self,
        line: usize,
        name: &str,
        field: &str,
    ) -> Result<T, DataError> {
        if !field.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.error(line, format!("{name}: invalid integer '{field}'")));
        }
        field
            .parse()
            .map_err(|_| self.error(line, format!("{name}: invalid integer '{field}'")))
    }

    pub fn id(&self, line: usize, field: &'a str) -> Result<&'a str, DataError> {
        if valid_id(field) {
            Ok(field)
        } else {
            Err(self.error(line, format!("invalid id '{field}'")))
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, DataError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| DataError::Decode {
        path: path.to_owned(),
        offset: e.utf8_error().valid_up_to() as u64,
        message: "invalid UTF-8".into(),
    })
}
