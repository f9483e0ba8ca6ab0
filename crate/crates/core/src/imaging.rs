//! Dense images, HSV conversion and binary PNM (P5/P6) input/output.
//!
//! Pixels are stored row-major from the top-left corner as `f64` intensities
//! in `[0, 1]`, channel-interleaved for RGB. Coordinates follow the usual
//! image convention: `row` grows downward, `col` grows to the right, and the
//! continuous point `(x, y)` sits at the center of pixel `(row = y, col = x)`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::domain(format!("unsupported channel count {channels}")));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::domain(format!(
                "pixel buffer has {} values, expected {}x{}x{}",
                pixels.len(),
                height,
                width,
                channels
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::domain(format!("intensity {bad} outside [0,1]")));
        }
        Ok(Image {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3);
        let value = value.clamp(0.0, 1.0);
        Image {
            height,
            width,
            channels,
            pixels: vec![value; height * width * channels],
        }
    }

    /// Builds a grayscale image from `f(row, col)`, clamping into `[0, 1]`.
    pub fn gray_from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(clamp01(f(r, c)));
            }
        }
        Image {
            height,
            width,
            channels: 1,
            pixels,
        }
    }

    /// Builds a grayscale image from raw values, clamping into `[0, 1]`.
    pub fn gray_from_clamped(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::domain(format!(
                "value buffer has {} entries, expected {}",
                values.len(),
                height * width
            )));
        }
        Ok(Image {
            height,
            width,
            channels: 1,
            pixels: values.into_iter().map(clamp01).collect(),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.pixels[(row * self.width + col) * self.channels + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        let idx = (row * self.width + col) * self.channels + channel;
        self.pixels[idx] = clamp01(value);
    }

    pub fn rgb(&self, row: usize, col: usize) -> Rgb {
        debug_assert_eq!(self.channels, 3);
        let i = (row * self.width + col) * 3;
        Rgb {
            r: self.pixels[i],
            g: self.pixels[i + 1],
            b: self.pixels[i + 2],
        }
    }

    /// Rec. 601 luma for RGB input; a copy for grayscale input.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|p| clamp01(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]))
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            pixels,
        }
    }

    /// Bilinear sample of a grayscale image at the continuous point
    /// `(x, y)`; neighbors outside the image contribute `fill`.
    pub fn sample_bilinear(&self, x: f64, y: f64, fill: f64) -> f64 {
        debug_assert_eq!(self.channels, 1);
        let x0 = x.floor();
        let y0 = y.floor();
        let ax = x - x0;
        let ay = y - y0;
        let (c0, r0) = (x0 as i64, y0 as i64);
        let at = |r: i64, c: i64| -> f64 {
            if r < 0 || c < 0 || r >= self.height as i64 || c >= self.width as i64 {
                fill
            } else {
                self.pixels[r as usize * self.width + c as usize]
            }
        };
        // Skip zero-weight taps so exact integer positions never touch the border fill.
        let mut acc = (1.0 - ax) * (1.0 - ay) * at(r0, c0);
        if ax != 0.0 {
            acc += ax * (1.0 - ay) * at(r0, c0 + 1);
        }
        if ay != 0.0 {
            acc += (1.0 - ax) * ay * at(r0 + 1, c0);
            if ax != 0.0 {
                acc += ax * ay * at(r0 + 1, c0 + 1);
            }
        }
        acc
    }
}

#[inline]
pub fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

/// Hexcone HSV with hue normalized to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn rgb_to_hsv(p: Rgb) -> Result<Hsv> {
    for (name, c) in [("r", p.r), ("g", p.g), ("b", p.b)] {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::domain(format!("{name} component {c} outside [0,1]")));
        }
    }
    Ok(rgb_to_hsv_unchecked(p))
}

#[inline]
pub(crate) fn rgb_to_hsv_unchecked(p: Rgb) -> Hsv {
    let max = p.r.max(p.g).max(p.b);
    let min = p.r.min(p.g).min(p.b);
    let delta = max - min;
    if delta == 0.0 {
        return Hsv { h: 0.0, s: 0.0, v: max };
    }
    let sector = if max == p.r {
        ((p.g - p.b) / delta).rem_euclid(6.0)
    } else if max == p.g {
        (p.b - p.r) / delta + 2.0
    } else {
        (p.r - p.g) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h >= 1.0 {
        h -= 1.0;
    }
    Hsv {
        h,
        s: delta / max,
        v: max,
    }
}

pub fn hsv_to_rgb(p: Hsv) -> Rgb {
    let h6 = p.h.rem_euclid(1.0) * 6.0;
    let c = p.v * p.s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let m = p.v - c;
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    Rgb {
        r: r + m,
        g: g + m,
        b: b + m,
    }
}

/// Copies an `h` x `w` window whose top-left corner is `(top, left)` in the
/// source; source positions outside the image take `fill`.
pub fn crop(img: &Image, top: i64, left: i64, h: usize, w: usize, fill: f64) -> Image {
    assert!(h >= 1 && w >= 1, "crop dimensions must be positive");
    let ch = img.channels;
    let fill = clamp01(fill);
    let mut pixels = vec![fill; h * w * ch];
    for r in 0..h {
        let sr = top + r as i64;
        if sr < 0 || sr >= img.height as i64 {
            continue;
        }
        for c in 0..w {
            let sc = left + c as i64;
            if sc < 0 || sc >= img.width as i64 {
                continue;
            }
            let src = (sr as usize * img.width + sc as usize) * ch;
            let dst = (r * w + c) * ch;
            pixels[dst..dst + ch].copy_from_slice(&img.pixels[src..src + ch]);
        }
    }
    Image {
        height: h,
        width: w,
        channels: ch,
        pixels,
    }
}

/// Top-left corner of an `h` x `w` window centered on `(row, col)`.
pub fn centered_origin(row: f64, col: f64, h: usize, w: usize) -> (i64, i64) {
    (
        (row - h as f64 / 2.0).round() as i64,
        (col - w as f64 / 2.0).round() as i64,
    )
}

/// Sample precision used when writing PNM files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum BitDepth {
    /// maxval 255, one byte per sample.
    #[default]
    Eight,
    /// maxval 65535, two big-endian bytes per sample.
    Sixteen,
}

impl BitDepth {
    fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// Reads a binary PGM (P5) or PPM (P6) file.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes).map_err(|reason| Error::format(path, reason))
}

/// Writes an 8-bit PGM or PPM; intensity `i` is stored as `round(i * 255)`.
pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    write_image_with_depth(img, path, BitDepth::Eight)
}

pub fn write_image_with_depth(img: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pnm(img, depth);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_pnm(img: &Image, depth: BitDepth) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let maxval = depth.maxval();
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width, img.height).into_bytes();
    let scale = maxval as f64;
    for &p in &img.pixels {
        let q = (clamp01(p) * scale).round() as u32;
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

pub fn decode_pnm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while let Some(b) = bytes.get(pos) {
            if b.is_ascii_whitespace() || *b == b'#' {
                break;
            }
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ascii header")?);
    }
    let channels = match tokens[0] {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic {other:?}")),
    };
    let parse = |t: &str, what: &str| -> std::result::Result<usize, String> {
        t.parse::<usize>().map_err(|_| format!("bad {what} {t:?}"))
    };
    let width = parse(tokens[1], "width")?;
    let height = parse(tokens[2], "height")?;
    let maxval = parse(tokens[3], "maxval")?;
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing whitespace after maxval".into()),
    }
    let samples = width * height * channels;
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let payload = &bytes[pos..];
    if payload.len() < samples * bytes_per {
        return Err(format!(
            "truncated payload: {} bytes, expected {}",
            payload.len(),
            samples * bytes_per
        ));
    }
    let scale = maxval as f64;
    let mut pixels = Vec::with_capacity(samples);
    for i in 0..samples {
        let raw = if bytes_per == 1 {
            payload[i] as usize
        } else {
            u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as usize
        };
        if raw > maxval {
            return Err(format!("sample {raw} exceeds maxval {maxval}"));
        }
        pixels.push(raw as f64 / scale);
    }
    Ok(Image {
        height,
        width,
        channels,
        pixels,
    })
}
