//! Image-sequence loading, grayscale conversion, affine patch warping and
//! overlay rendering.
//!
//! Frames are dense `f64` grayscale rasters in `[0, 1]`. PGM/PPM files are
//! parsed and written directly (they are the bit-exact golden format); PNG
//! and JPEG go through the `image` crate. Color is collapsed with the
//! 0.299/0.587/0.114 luma weights.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::Box2D;
use crate::tracker::AffineState;

/// A grayscale frame with pixels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::dims(format!(
                "frame {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    /// Bilinear sample at real coordinates; outside coordinates clamp to the
    /// border pixel.
    pub fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let xf = x.floor();
        let yf = y.floor();
        let fx = x - xf;
        let fy = y - yf;
        let clamp_x = |v: f64| (v.max(0.0) as usize).min(self.width - 1);
        let clamp_y = |v: f64| (v.max(0.0) as usize).min(self.height - 1);
        let x0 = clamp_x(xf);
        let x1 = clamp_x(xf + 1.0);
        let y0 = clamp_y(yf);
        let y1 = clamp_y(yf + 1.0);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// One ground-truth box per frame, 1-indexed by line number.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    boxes: Vec<Box2D>,
}

impl GroundTruth {
    pub fn boxes(&self) -> &[Box2D] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

fn luma(r: u8, g: u8, b: u8) -> f64 {
    (LUMA_R * f64::from(r) + LUMA_G * f64::from(g) + LUMA_B * f64::from(b)) / 255.0
}

/// Loads all frames from `dir` whose file names match `pattern` (a glob with
/// `*` and `?`), ordered by the numeric index embedded in the name.
///
/// Indices must be consecutive; a gap or a duplicate is an error, as is any
/// unreadable file.
pub fn load_sequence(dir: &Path, pattern: &str) -> Result<Vec<Frame>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indexed: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n.to_string(),
            None => continue,
        };
        if !glob_match(pattern, &name) {
            continue;
        }
        if !is_supported_image(&path) {
            continue;
        }
        let index = numeric_index(&name).ok_or_else(|| {
            Error::parse(&path, 0, "file name carries no numeric frame index".to_string())
        })?;
        indexed.push((index, path));
    }
    if indexed.is_empty() {
        return Err(Error::parse(
            dir,
            0,
            format!("no frames matching `{pattern}` found"),
        ));
    }
    indexed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    for pair in indexed.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        if next.0 == prev.0 {
            return Err(Error::parse(
                &next.1,
                0,
                format!("duplicate frame index {}", next.0),
            ));
        }
        if next.0 != prev.0 + 1 {
            return Err(Error::parse(
                &next.1,
                0,
                format!("gap in frame indices: {} jumps to {}", prev.0, next.0),
            ));
        }
    }
    indexed.into_iter().map(|(_, path)| load_frame(&path)).collect()
}

fn is_supported_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "ppm" | "pnm" | "png" | "jpg" | "jpeg")
    )
}

/// Last run of ASCII digits in the file stem.
fn numeric_index(name: &str) -> Option<u64> {
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    let bytes = stem.as_bytes();
    let end = bytes.iter().rposition(|b| b.is_ascii_digit())? + 1;
    let start = bytes[..end]
        .iter()
        .rposition(|b| !b.is_ascii_digit())
        .map_or(0, |p| p + 1);
    stem[start..end].parse().ok()
}

fn glob_match(pattern: &str, name: &str) -> bool {
    fn rec(p: &[u8], n: &[u8]) -> bool {
        match (p.first(), n.first()) {
            (None, None) => true,
            (Some(b'*'), _) => rec(&p[1..], n) || (!n.is_empty() && rec(p, &n[1..])),
            (Some(b'?'), Some(_)) => rec(&p[1..], &n[1..]),
            (Some(a), Some(b)) if a == b => rec(&p[1..], &n[1..]),
            _ => false,
        }
    }
    rec(pattern.as_bytes(), name.as_bytes())
}

/// Loads a single image as a grayscale frame.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" | "ppm" | "pnm" => load_pnm(path),
        "png" | "jpg" | "jpeg" => {
            let img = image::open(path)
                .map_err(|e| Error::parse(path, 0, format!("image decode failed: {e}")))?
                .into_rgb8();
            let (w, h) = (img.width() as usize, img.height() as usize);
            let mut pixels = Vec::with_capacity(w * h);
            for p in img.pixels() {
                pixels.push(luma(p.0[0], p.0[1], p.0[2]));
            }
            Frame::new(w, h, pixels)
        }
        other => Err(Error::parse(path, 0, format!("unsupported image extension `{other}`"))),
    }
}

// --- PNM (P2/P3/P5/P6, maxval <= 255) ---------------------------------------

struct PnmScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PnmScanner<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Option<u64> {
        let tok = self.token()?;
        std::str::from_utf8(tok).ok()?.parse().ok()
    }
}

fn load_pnm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::parse(path, 0, reason);

    let mut scan = PnmScanner::new(&bytes);
    let magic = scan
        .token()
        .ok_or_else(|| bad("missing magic number".to_string()))?
        .to_vec();
    let channels = match magic.as_slice() {
        b"P2" | b"P5" => 1usize,
        b"P3" | b"P6" => 3usize,
        other => {
            return Err(bad(format!(
                "unsupported magic `{}`",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let ascii = matches!(magic.as_slice(), b"P2" | b"P3");
    let width = scan.number().ok_or_else(|| bad("missing width".to_string()))? as usize;
    let height = scan.number().ok_or_else(|| bad("missing height".to_string()))? as usize;
    let maxval = scan.number().ok_or_else(|| bad("missing maxval".to_string()))?;
    if maxval == 0 || maxval > 255 {
        return Err(bad(format!("maxval {maxval} not supported (need 1..=255)")));
    }
    let scale = maxval as f64;
    let count = width * height * channels;

    let raw: Vec<u64> = if ascii {
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            v.push(scan.number().ok_or_else(|| bad("truncated ASCII sample data".to_string()))?);
        }
        v
    } else {
        // Binary data starts after exactly one whitespace byte past maxval.
        let start = scan.pos + 1;
        if bytes.len() < start + count {
            return Err(bad(format!(
                "truncated binary data: need {count} samples, have {}",
                bytes.len().saturating_sub(start)
            )));
        }
        bytes[start..start + count].iter().map(|&b| u64::from(b)).collect()
    };

    let pixels: Vec<f64> = if channels == 1 {
        raw.iter().map(|&v| v as f64 / scale).collect()
    } else {
        raw.chunks_exact(3)
            .map(|c| {
                (LUMA_R * c[0] as f64 + LUMA_G * c[1] as f64 + LUMA_B * c[2] as f64) / scale
            })
            .collect()
    };
    Frame::new(width, height, pixels)
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a frame as binary PGM (P5, maxval 255).
pub fn write_pgm(frame: &Frame, path: &Path) -> Result<()> {
    let mut data = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    data.extend(frame.pixels.iter().map(|&v| quantize(v)));
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

/// RGB color for overlay boxes.
pub type Rgb = [u8; 3];

/// Writes the frame as binary PPM with 1-px box outlines drawn over it.
///
/// Boxes are rounded to the pixel grid and clipped to the frame; an empty box
/// list re-encodes the frame unchanged.
pub fn write_overlay(frame: &Frame, boxes: &[(Box2D, Rgb)], path: &Path) -> Result<()> {
    let w = frame.width;
    let h = frame.height;
    let mut rgb: Vec<u8> = Vec::with_capacity(w * h * 3);
    for &v in &frame.pixels {
        let g = quantize(v);
        rgb.extend_from_slice(&[g, g, g]);
    }

    let mut paint = |x: i64, y: i64, c: Rgb| {
        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
            let at = (y as usize * w + x as usize) * 3;
            rgb[at..at + 3].copy_from_slice(&c);
        }
    };
    for (b, color) in boxes {
        let x0 = b.x.round() as i64;
        let y0 = b.y.round() as i64;
        let x1 = x0 + (b.w.round() as i64) - 1;
        let y1 = y0 + (b.h.round() as i64) - 1;
        if x1 < x0 || y1 < y0 {
            continue;
        }
        for x in x0..=x1 {
            paint(x, y0, *color);
            paint(x, y1, *color);
        }
        for y in y0 + 1..y1 {
            paint(x0, y, *color);
            paint(x1, y, *color);
        }
    }

    let mut data = format!("P6\n{w} {h}\n255\n").into_bytes();
    data.extend(rgb);
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

/// Parses an OTB-style ground-truth file: one box per line, `x,y,w,h` (or an
/// 8-number polygon reduced to its bounding box), comma or TAB separated.
pub fn parse_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut boxes = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            if lines[i..].iter().all(|l| l.trim().is_empty()) {
                break;
            }
            return Err(Error::parse(path, lineno, "blank line inside ground truth".to_string()));
        }
        let fields: Vec<f64> = line
            .split([',', '\t'])
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, lineno, format!("bad number: {e}")))?;
        let b = match fields.len() {
            4 => Box2D::new(fields[0], fields[1], fields[2], fields[3]),
            8 => {
                let xs = [fields[0], fields[2], fields[4], fields[6]];
                let ys = [fields[1], fields[3], fields[5], fields[7]];
                let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
                let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Box2D::new(xmin, ymin, xmax - xmin, ymax - ymin)
            }
            n => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 4 or 8 fields, found {n}"),
                ))
            }
        };
        if !(b.w > 0.0 && b.h > 0.0) {
            return Err(Error::parse(
                path,
                lineno,
                format!("degenerate box {}x{}", b.w, b.h),
            ));
        }
        boxes.push(b);
    }
    Ok(GroundTruth { boxes })
}

/// Warps the frame region selected by `state` into a flattened `side²`
/// observation vector (row-major, `[0, 1]`).
///
/// Inverse-warp sampling: each output pixel's centered template coordinate is
/// mapped through the state into frame coordinates and bilinearly
/// interpolated, clamping at the frame border.
pub fn warp_patch(frame: &Frame, state: &AffineState, side: usize) -> Result<Vec<f64>> {
    if side < 2 {
        return Err(Error::invalid("side", format!("patch side must be >= 2, got {side}")));
    }
    if !state.is_finite() {
        return Err(Error::invalid("state", format!("non-finite affine state {state:?}")));
    }
    let [m00, m01, m10, m11] = state.linear();
    let half = (side as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        let v = i as f64 - half;
        for j in 0..side {
            let u = j as f64 - half;
            let x = m00 * u + m01 * v + state.tx;
            let y = m10 * u + m11 * v + state.ty;
            out.push(frame.sample_clamped(x, y));
        }
    }
    Ok(out)
}

/// Resamples a whole frame to a `side × side` patch vector (used when images
/// themselves are the observations, e.g. template stacks).
pub fn resize_to_patch(frame: &Frame, side: usize) -> Result<Vec<f64>> {
    if side < 2 {
        return Err(Error::invalid("side", format!("patch side must be >= 2, got {side}")));
    }
    let sx = frame.width as f64 / side as f64;
    let sy = frame.height as f64 / side as f64;
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        let y = (i as f64 + 0.5) * sy - 0.5;
        for j in 0..side {
            let x = (j as f64 + 0.5) * sx - 0.5;
            out.push(frame.sample_clamped(x, y));
        }
    }
    Ok(out)
}
