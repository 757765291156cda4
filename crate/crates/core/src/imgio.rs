//! Image, annotation and dataset loading.
//!
//! Images are binary PGM (`P5`, one plane) or PPM (`P6`, three planes) with
//! maxval 255. Samples are stored row-major with planes interleaved: the
//! sample for plane `p` at `(x, y)` lives at `(y * width + x) * planes + p`.
//!
//! Annotations are plain text, one box per line: `x y w h [ignore]`, where
//! `ignore` is `0` or `1`. Blank lines and lines starting with `#` are
//! skipped.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImgIoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated image data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("malformed annotation at line {line}: {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("non-positive box dimension at line {line}")]
    NegativeDimension { line: usize },
    #[error("positive image {0} has no annotation file")]
    MissingAnnotation(PathBuf),
    #[error("dataset at {0} contains no images")]
    EmptyDataset(PathBuf),
}

pub type Result<T, E = ImgIoError> = std::result::Result<T, E>;

/// 8-bit image with 1 (gray) or 3 (RGB) interleaved planes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    planes: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, planes: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImgIoError::InvalidImage(format!("empty extent {width}x{height}")));
        }
        if planes != 1 && planes != 3 {
            return Err(ImgIoError::InvalidImage(format!("{planes} planes")));
        }
        if data.len() != width * height * planes {
            return Err(ImgIoError::InvalidImage(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                planes
            )));
        }
        Ok(Self {
            width,
            height,
            planes,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, pixel: &[u8]) -> Result<Self> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        Self::new(width, height, pixel.len(), data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn planes(&self) -> usize {
        self.planes
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, plane: usize) -> u8 {
        self.data[(y * self.width + x) * self.planes + plane]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, plane: usize, value: u8) {
        self.data[(y * self.width + x) * self.planes + plane] = value;
    }

    /// Three-plane copy; gray samples are replicated.
    pub fn to_rgb(&self) -> Image {
        if self.planes == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            width: self.width,
            height: self.height,
            planes: 3,
            data,
        }
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImgIoError::MalformedHeader("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                ImgIoError::MalformedHeader(format!("bad {what}: {:?}", String::from_utf8_lossy(tok)))
            })
    }
}

/// Decodes a binary PGM/PPM byte buffer.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut rd = HeaderReader { bytes, pos: 0 };
    let magic = rd.token()?;
    let planes = match magic {
        b"P5" => 1,
        b"P6" => 3,
        b"P1" | b"P2" | b"P3" | b"P4" | b"P7" => {
            return Err(ImgIoError::UnsupportedFormat(format!(
                "{} (only binary P5/P6 supported)",
                String::from_utf8_lossy(magic)
            )))
        }
        other => {
            return Err(ImgIoError::MalformedHeader(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImgIoError::MalformedHeader(format!("empty extent {width}x{height}")));
    }
    if maxval != 255 {
        return Err(ImgIoError::UnsupportedFormat(format!("maxval {maxval} (only 255 supported)")));
    }
    // exactly one whitespace byte separates the header from the raster
    if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
        return Err(ImgIoError::MalformedHeader("missing raster separator".into()));
    }
    let start = rd.pos + 1;
    let expected = width * height * planes;
    let found = bytes.len() - start;
    if found < expected {
        return Err(ImgIoError::TruncatedData { expected, found });
    }
    Image::new(width, height, planes, bytes[start..start + expected].to_vec())
}

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.planes == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|source| ImgIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pnm(&bytes)
}

pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode_pnm(img)).map_err(|source| ImgIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Annotated object extent in image pixels (top-left corner plus size).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruthBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub ignore: bool,
}

impl GroundTruthBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self {
            x,
            y,
            w,
            h,
            ignore: false,
        }
    }

    pub fn intersects_extent(&self, width: usize, height: usize) -> bool {
        self.x < width as f64 && self.y < height as f64 && self.x + self.w > 0.0 && self.y + self.h > 0.0
    }
}

pub fn parse_annotations(text: &str) -> Result<Vec<GroundTruthBox>> {
    let mut boxes = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = || ImgIoError::MalformedLine {
            line: idx + 1,
            content: raw.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(malformed());
        }
        let mut v = [0.0f64; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse::<f64>().map_err(|_| malformed())?;
            if !slot.is_finite() {
                return Err(malformed());
            }
        }
        let ignore = match fields.get(4) {
            None | Some(&"0") => false,
            Some(&"1") => true,
            Some(_) => return Err(malformed()),
        };
        if v[2] <= 0.0 || v[3] <= 0.0 {
            return Err(ImgIoError::NegativeDimension { line: idx + 1 });
        }
        boxes.push(GroundTruthBox {
            x: v[0],
            y: v[1],
            w: v[2],
            h: v[3],
            ignore,
        });
    }
    Ok(boxes)
}

pub fn load_annotations(path: &Path) -> Result<Vec<GroundTruthBox>> {
    let text = fs::read_to_string(path).map_err(|source| ImgIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotations(&text)
}

pub fn format_annotations(boxes: &[GroundTruthBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&format!("{} {} {} {}", b.x, b.y, b.w, b.h));
        if b.ignore {
            out.push_str(" 1");
        }
        out.push('\n');
    }
    out
}

/// Subdirectory names of a dataset root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetLayout {
    pub positives: String,
    pub annotations: String,
    pub negatives: String,
    pub annotation_ext: String,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        Self {
            positives: "pos".into(),
            annotations: "pos-annot".into(),
            negatives: "neg".into(),
            annotation_ext: "txt".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PositiveEntry {
    pub image: PathBuf,
    pub annotation: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetIndex {
    pub positives: Vec<PositiveEntry>,
    pub negatives: Vec<PathBuf>,
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
        Some(ref e) if e == "ppm" || e == "pgm"
    )
}

/// Sorted, deduplicated image files directly inside `dir`. A missing
/// directory yields an empty list.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let entries = fs::read_dir(dir).map_err(|source| ImgIoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| ImgIoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let p = entry.path();
        if p.is_file() && is_image(&p) {
            out.push(p);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn scan_dataset(root: &Path, layout: &DatasetLayout) -> Result<DatasetIndex> {
    let pos = list_images(&root.join(&layout.positives))?;
    let neg = list_images(&root.join(&layout.negatives))?;
    if pos.is_empty() && neg.is_empty() {
        return Err(ImgIoError::EmptyDataset(root.to_path_buf()));
    }
    let annot_dir = root.join(&layout.annotations);
    let mut positives = Vec::with_capacity(pos.len());
    for image in pos {
        let mut name = image.file_stem().unwrap_or_default().to_os_string();
        name.push(".");
        name.push(&layout.annotation_ext);
        let annotation = annot_dir.join(name);
        if !annotation.is_file() {
            return Err(ImgIoError::MissingAnnotation(image));
        }
        positives.push(PositiveEntry { image, annotation });
    }
    Ok(DatasetIndex {
        positives,
        negatives: neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_gray_image() {
        let img = decode_pnm(b"P5\n1 1\n255\n\0").unwrap();
        assert_eq!((img.width(), img.height(), img.planes()), (1, 1, 1));
        assert_eq!(img.data(), &[0]);
    }

    #[test]
    fn constant_red_color_image() {
        let mut bytes = b"P6 2 2 255\n".to_vec();
        for _ in 0..4 {
            bytes.extend_from_slice(&[255, 0, 0]);
        }
        let img = decode_pnm(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.planes()), (2, 2, 3));
        assert_eq!(img, Image::filled(2, 2, &[255, 0, 0]).unwrap());
    }

    #[test]
    fn truncated_raster() {
        let err = decode_pnm(b"P6\n4 4\n255\n\x01\x02\x03").unwrap_err();
        assert!(matches!(err, ImgIoError::TruncatedData { expected: 48, found: 3 }));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(decode_pnm(b"P3\n1 1\n255\n0 0 0"), Err(ImgIoError::UnsupportedFormat(_))));
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n\0\0"), Err(ImgIoError::UnsupportedFormat(_))));
        assert!(matches!(decode_pnm(b"XX\n1 1\n255\n\0"), Err(ImgIoError::MalformedHeader(_))));
        assert!(matches!(decode_pnm(b"P5\n1"), Err(ImgIoError::MalformedHeader(_))));
        assert!(matches!(decode_pnm(b"P5\nab 1\n255\n\0"), Err(ImgIoError::MalformedHeader(_))));
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = decode_pnm(b"P5\n# made by hand\n2 1 # trailing\n255\n\x07\x09").unwrap();
        assert_eq!(img.data(), &[7, 9]);
    }

    #[test]
    fn annotations() {
        assert!(parse_annotations("").unwrap().is_empty());
        let b = parse_annotations("10 20 32 64\n").unwrap();
        assert_eq!(b, vec![GroundTruthBox::new(10.0, 20.0, 32.0, 64.0)]);
        let b = parse_annotations("# comment\n\n1 2 3 4 1\n5 6 7 8 0\n").unwrap();
        assert!(b[0].ignore && !b[1].ignore);
        assert!(matches!(
            parse_annotations("10 20 -5 64"),
            Err(ImgIoError::NegativeDimension { line: 1 })
        ));
        assert!(matches!(
            parse_annotations("1 2 3 4\n1 2 x 4"),
            Err(ImgIoError::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(parse_annotations("1 2 3"), Err(ImgIoError::MalformedLine { .. })));
        assert!(matches!(parse_annotations("1 2 3 4 7"), Err(ImgIoError::MalformedLine { .. })));
    }

    #[test]
    fn annotation_text_round_trip() {
        let boxes = vec![
            GroundTruthBox::new(1.5, 2.0, 3.0, 4.25),
            GroundTruthBox {
                ignore: true,
                ..GroundTruthBox::new(0.0, 0.0, 1.0, 1.0)
            },
        ];
        assert_eq!(parse_annotations(&format_annotations(&boxes)).unwrap(), boxes);
    }

    fn put(path: &Path, bytes: &[u8]) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, bytes).unwrap();
    }

    #[test]
    fn scan_pairs_images_with_annotations() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let img = encode_pnm(&Image::filled(4, 4, &[1, 2, 3]).unwrap());
        put(&root.join("pos/b.ppm"), &img);
        put(&root.join("pos/frame.01.ppm"), &img);
        put(&root.join("pos/notes.md"), b"ignored");
        put(&root.join("pos-annot/b.txt"), b"0 0 2 2\n");
        put(&root.join("pos-annot/frame.01.txt"), b"");
        put(&root.join("neg/z.pgm"), &encode_pnm(&Image::filled(3, 3, &[9]).unwrap()));
        let idx = scan_dataset(root, &DatasetLayout::default()).unwrap();
        let names: Vec<_> = idx.positives.iter().map(|e| e.image.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["b.ppm", "frame.01.ppm"]);
        assert!(idx.positives[1].annotation.ends_with("pos-annot/frame.01.txt"));
        assert_eq!(idx.negatives.len(), 1);

        fs::remove_file(root.join("pos-annot/b.txt")).unwrap();
        assert!(matches!(scan_dataset(root, &DatasetLayout::default()), Err(ImgIoError::MissingAnnotation(_))));
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(scan_dataset(empty.path(), &DatasetLayout::default()), Err(ImgIoError::EmptyDataset(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::new(3, 2, 3, (0..18).map(|v| v * 14).collect()).unwrap();
        let p = dir.path().join("x.ppm");
        save_image(&p, &img).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    proptest::proptest! {
        #[test]
        fn pnm_round_trip(w in 1usize..9, h in 1usize..9, color in proptest::bool::ANY, seed in proptest::collection::vec(proptest::num::u8::ANY, 192)) {
            let planes = if color { 3 } else { 1 };
            let data: Vec<u8> = seed.iter().cycle().take(w * h * planes).copied().collect();
            let img = Image::new(w, h, planes, data).unwrap();
            proptest::prop_assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
        }
    }
}
