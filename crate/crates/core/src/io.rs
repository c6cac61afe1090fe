//! Text formats for images, fields and sinograms, plus 16-bit PGM previews.
//!
//! Image CSV:
//!
//! ```text
//! # optional comment lines
//! n <int> half_width <float>
//! v00,v01,...        (n rows of n values, row 0 = top = y max)
//! ```
//!
//! A field file is the same layout carrying a `# kind=field` comment. A sinogram file has
//! the header `n_angles <int> n_offsets <int> offset_extent <float>` and one row per angle.
//! Floats are written in Rust's shortest round-trip form, so CSV write/read is lossless.
//! PGM output is min-max normalised and quantised to 16 bits; it is for viewing only.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Grid, ImageGrid, Lattice, ScalarField};
use crate::projector::{RayGeometry, Sinogram};

const FIELD_MARKER: &str = "kind=field";
const SUPPORT_KEY: &str = "support_radius=";
const STEP_KEY: &str = "step_along_ray=";

/// Parsed non-comment lines with their 1-based line numbers, plus the comment bodies.
struct Lines<'a> {
    path: PathBuf,
    data: Vec<(usize, &'a str)>,
    comments: Vec<&'a str>,
}

impl<'a> Lines<'a> {
    fn split(text: &'a str, path: &Path) -> Self {
        let mut data = Vec::new();
        let mut comments = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if let Some(c) = trimmed.strip_prefix('#') {
                comments.push(c.trim());
            } else if !trimmed.is_empty() {
                data.push((idx + 1, trimmed));
            }
        }
        Self { path: path.to_path_buf(), data, comments }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse { path: self.path.clone(), line, message: message.into() }
    }

    fn comment_value(&self, key: &str) -> Option<&'a str> {
        self.comments
            .iter()
            .flat_map(|c| c.split_whitespace())
            .find_map(|tok| tok.strip_prefix(key))
    }

    fn has_marker(&self, marker: &str) -> bool {
        self.comments.iter().any(|c| c.split_whitespace().any(|t| t == marker))
    }

    fn header(&self, keys: &[&str]) -> Result<(usize, Vec<&'a str>)> {
        let Some(&(line, text)) = self.data.first() else {
            return Err(self.err(1, "empty file: missing header"));
        };
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let ok = tokens.len() == 2 * keys.len()
            && keys.iter().enumerate().all(|(i, k)| tokens[2 * i] == *k);
        if !ok {
            let expected: Vec<String> = keys.iter().map(|k| format!("{k} <value>")).collect();
            return Err(self.err(line, format!("expected header `{}`, found `{text}`", expected.join(" "))));
        }
        Ok((line, tokens.iter().skip(1).step_by(2).copied().collect()))
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, token: &str, what: &str) -> Result<T> {
        token
            .trim()
            .parse()
            .map_err(|_| self.err(line, format!("cannot parse {what} from `{token}`")))
    }

    /// Reads `rows` rows of `cols` comma-separated values following the header.
    fn table(&self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let body = &self.data[1..];
        if body.len() != rows {
            let line = body.last().map_or(self.data[0].0, |l| l.0);
            return Err(self.err(line, format!("header announces {rows} rows, found {}", body.len())));
        }
        let mut values = Array2::zeros((rows, cols));
        for (r, &(line, text)) in body.iter().enumerate() {
            let mut count = 0;
            for (c, tok) in text.split(',').enumerate() {
                if c >= cols {
                    return Err(self.err(line, format!("more than {cols} values in row")));
                }
                let v: f64 = self.parse(line, tok, "value")?;
                if !v.is_finite() {
                    return Err(self.err(line, format!("non-finite value `{tok}`")));
                }
                values[[r, c]] = v;
                count += 1;
            }
            if count != cols {
                return Err(self.err(line, format!("expected {cols} values, found {count}")));
            }
        }
        Ok(values)
    }
}

fn push_table(out: &mut String, values: &Array2<f64>) {
    for row in values.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
}

fn push_comments(out: &mut String, comments: &[String]) {
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn format_grid(out: &mut String, grid: &Grid, values: &Array2<f64>) {
    writeln!(out, "n {} half_width {}", grid.n(), grid.half_width()).unwrap();
    push_table(out, values);
}

/// Serialise an image; `comments` are emitted first, one `#` line each.
pub fn format_image(image: &ImageGrid, comments: &[String]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    writeln!(out, "# {SUPPORT_KEY}{}", image.support_radius()).unwrap();
    format_grid(&mut out, image.grid(), image.values());
    out
}

pub fn format_field(field: &ScalarField, comments: &[String]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    writeln!(out, "# {FIELD_MARKER}").unwrap();
    format_grid(&mut out, field.grid(), field.values());
    out
}

fn parse_grid(lines: &Lines<'_>) -> Result<(Grid, Array2<f64>)> {
    let (line, tok) = lines.header(&["n", "half_width"])?;
    let n: usize = lines.parse(line, tok[0], "n")?;
    let half_width: f64 = lines.parse(line, tok[1], "half_width")?;
    let grid = Grid::new(n, half_width).map_err(|e| lines.err(line, e.to_string()))?;
    let values = lines.table(n, n)?;
    Ok((grid, values))
}

pub fn parse_image(text: &str, path: &Path) -> Result<ImageGrid> {
    let lines = Lines::split(text, path);
    if lines.has_marker(FIELD_MARKER) {
        return Err(lines.err(1, "file holds a field (`kind=field`), not an image"));
    }
    let (grid, values) = parse_grid(&lines)?;
    let header_line = lines.data[0].0;
    match lines.comment_value(SUPPORT_KEY) {
        Some(tok) => {
            let radius: f64 = lines.parse(header_line, tok, "support_radius")?;
            ImageGrid::new(grid, radius, values)
        }
        None => ImageGrid::from_values(grid, values),
    }
    .map_err(|e| lines.err(header_line, e.to_string()))
}

pub fn parse_field(text: &str, path: &Path) -> Result<ScalarField> {
    let lines = Lines::split(text, path);
    if !lines.has_marker(FIELD_MARKER) {
        return Err(lines.err(1, "missing `# kind=field` marker"));
    }
    let (grid, values) = parse_grid(&lines)?;
    ScalarField::new(grid, values)
}

pub fn write_image(image: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_image(image, &[]))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    parse_image(&read_text(path)?, path)
}

pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_field(field, &[]))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    parse_field(&read_text(path)?, path)
}

pub fn format_sinogram(sino: &Sinogram, comments: &[String]) -> String {
    let g = sino.geometry();
    let mut out = String::new();
    push_comments(&mut out, comments);
    writeln!(out, "# {STEP_KEY}{}", g.step_along_ray()).unwrap();
    writeln!(
        out,
        "n_angles {} n_offsets {} offset_extent {}",
        g.n_angles(),
        g.n_offsets(),
        g.offset_extent()
    )
    .unwrap();
    push_table(&mut out, sino.values());
    out
}

/// Parse a sinogram. Without a `# step_along_ray=` comment the step defaults to half
/// the offset spacing.
pub fn parse_sinogram(text: &str, path: &Path) -> Result<Sinogram> {
    let lines = Lines::split(text, path);
    let (line, tok) = lines.header(&["n_angles", "n_offsets", "offset_extent"])?;
    let n_angles: usize = lines.parse(line, tok[0], "n_angles")?;
    let n_offsets: usize = lines.parse(line, tok[1], "n_offsets")?;
    let extent: f64 = lines.parse(line, tok[2], "offset_extent")?;
    let step = match lines.comment_value(STEP_KEY) {
        Some(t) => lines.parse(line, t, "step_along_ray")?,
        None if n_offsets > 1 => extent / (n_offsets - 1) as f64,
        None => extent,
    };
    let geometry =
        RayGeometry::new(n_angles, n_offsets, extent, step).map_err(|e| lines.err(line, e.to_string()))?;
    let values = lines.table(n_angles, n_offsets)?;
    Sinogram::new(geometry, values).map_err(|e| lines.err(line, e.to_string()))
}

pub fn write_sinogram(sino: &Sinogram, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_sinogram(sino, &[]))
}

pub fn read_sinogram(path: impl AsRef<Path>) -> Result<Sinogram> {
    let path = path.as_ref();
    parse_sinogram(&read_text(path)?, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PgmEncoding {
    /// `P2`, plain text.
    Ascii,
    /// `P5`, big-endian 16-bit samples.
    #[default]
    Binary,
}

/// Encode values as a 16-bit greyscale PGM, min-max normalised. A constant image maps to 0.
pub fn encode_pgm(values: &Array2<f64>, encoding: PgmEncoding, comment: Option<&str>) -> Vec<u8> {
    let (rows, cols) = values.dim();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let quantise = |v: f64| -> u16 {
        if span > 0.0 && span.is_finite() {
            ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        }
    };
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut header = format!("{magic}\n");
    if let Some(c) = comment {
        for line in c.lines() {
            header.push_str(&format!("# {line}\n"));
        }
    }
    header.push_str(&format!("{cols} {rows}\n65535\n"));
    let mut out = header.into_bytes();
    match encoding {
        PgmEncoding::Binary => {
            for &v in values {
                out.extend_from_slice(&quantise(v).to_be_bytes());
            }
        }
        PgmEncoding::Ascii => {
            let mut text = String::new();
            for row in values.rows() {
                let line: Vec<String> = row.iter().map(|&v| quantise(v).to_string()).collect();
                text.push_str(&line.join(" "));
                text.push('\n');
            }
            out.extend_from_slice(text.as_bytes());
        }
    }
    out
}

pub fn write_pgm(values: &Array2<f64>, path: impl AsRef<Path>, encoding: PgmEncoding) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(values, encoding, None))
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::generate_shepp_logan;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn image_round_trip_is_bit_exact() {
        let mut img = generate_shepp_logan(17, 1.3).unwrap();
        img.values_mut()[[8, 8]] = 0.1 + 0.2; // not exactly representable in short decimal
        img.values_mut()[[8, 9]] = -0.0;
        img.values_mut()[[8, 10]] = 1e-300;
        let text = format_image(&img, &["provenance line".into()]);
        let back = parse_image(&text, p()).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.values()[[8, 9]].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let err = parse_image("", p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        assert!(parse_image("# only a comment\n", p()).is_err());
    }

    #[test]
    fn row_count_mismatch_is_reported_with_line() {
        let text = "n 3 half_width 1\n0,0,0\n0,0,0\n";
        match parse_image(text, p()).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("3 rows"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_value_and_short_row_are_located() {
        let text = "n 2 half_width 1\n0,1\n0,abc\n";
        assert!(matches!(parse_image(text, p()), Err(Error::Parse { line: 3, .. })));
        let text = "n 2 half_width 1\n0\n0,1\n";
        assert!(matches!(parse_image(text, p()), Err(Error::Parse { line: 2, .. })));
        let text = "x 2 half_width 1\n0,1\n0,1\n";
        assert!(matches!(parse_image(text, p()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn field_and_image_are_distinguished() {
        let g = Grid::new(4, 1.0).unwrap();
        let field = ScalarField::constant(g, std::f64::consts::TAU);
        let text = format_field(&field, &[]);
        assert!(text.contains("# kind=field"));
        assert_eq!(parse_field(&text, p()).unwrap(), field);
        assert!(parse_image(&text, p()).is_err());
        let img = ImageGrid::zeros(g);
        assert!(parse_field(&format_image(&img, &[]), p()).is_err());
    }

    #[test]
    fn sinogram_round_trip() {
        let geom = RayGeometry::new(3, 5, 1.5, 0.01).unwrap();
        let values = Array2::from_shape_fn((3, 5), |(a, b)| (a * 5 + b) as f64 / 7.0);
        let sino = Sinogram::new(geom, values).unwrap();
        let back = parse_sinogram(&format_sinogram(&sino, &[]), p()).unwrap();
        assert_eq!(back, sino);
    }

    #[test]
    fn pgm_header_and_size() {
        let v = Array2::from_shape_fn((2, 3), |(i, j)| (i * 3 + j) as f64);
        let bytes = encode_pgm(&v, PgmEncoding::Binary, Some("c"));
        let header = b"P5\n# c\n3 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 12);
        assert_eq!(&bytes[header.len()..header.len() + 2], &[0, 0]);
        assert_eq!(&bytes[bytes.len() - 2..], &[255, 255]);
        let ascii = String::from_utf8(encode_pgm(&v, PgmEncoding::Ascii, None)).unwrap();
        assert!(ascii.starts_with("P2\n3 2\n65535\n0 13107 26214\n"));
    }
}
