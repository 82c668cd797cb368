//! File formats: 16-bit depth PNGs, float maps, sky masks, PGM edge maps,
//! 8-bit images and xyz pointclouds.
//!
//! Float map layout: `FMAP1\n`, then ASCII `W H\n`, then `W*H` little-endian
//! `f32` values in row-major order. NaN marks an invalid pixel.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, PointCloud};
use crate::grid::{Grid, Image};
use crate::metrics::EdgeMap;

const FMAP_MAGIC: &[u8] = b"FMAP1\n";
/// 16-bit PNG depth units per meter.
pub const PNG16_SCALE: f64 = 256.0;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

pub fn decode_float_map(bytes: &[u8], path: &Path) -> Result<Grid<f64>> {
    let rest = bytes
        .strip_prefix(FMAP_MAGIC)
        .ok_or_else(|| Error::format(path, "missing FMAP1 magic"))?;
    let newline = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "missing dimension line"))?;
    let header = std::str::from_utf8(&rest[..newline]).map_err(|_| Error::format(path, "non-ASCII header"))?;
    let dims: Vec<usize> = header
        .split_ascii_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(path, format!("bad dimensions `{header}`")))?;
    let [w, h] = dims[..] else {
        return Err(Error::format(path, format!("expected `W H`, got `{header}`")));
    };
    let payload = &rest[newline + 1..];
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(path, "dimensions overflow"))?;
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, expected {expected} for {w}x{h}", payload.len()),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Grid::from_vec(w, h, data)
}

pub fn encode_float_map(grid: &Grid<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(FMAP_MAGIC.len() + 24 + 4 * grid.len());
    out.extend_from_slice(FMAP_MAGIC);
    out.extend_from_slice(format!("{} {}\n", grid.width(), grid.height()).as_bytes());
    for &v in grid.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Reads a float map; values are widened from `f32`.
pub fn load_float_map(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let path = path.as_ref();
    decode_float_map(&read(path)?, path)
}

/// Writes a float map; values are narrowed to `f32`.
pub fn save_float_map(path: impl AsRef<Path>, grid: &Grid<f64>) -> Result<()> {
    write(path.as_ref(), &encode_float_map(grid))
}

/// Depth from a float map: NaN, non-positive and infinite values are invalid.
pub fn load_depth_float_map(path: impl AsRef<Path>) -> Result<DepthMap> {
    Ok(DepthMap::new(load_float_map(path)?))
}

pub fn save_depth_float_map(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let values = depth
        .values()
        .zip_map(depth.valid(), |d, ok| if *ok { *d } else { f64::NAN })?;
    save_float_map(path, &values)
}

/// 16-bit single-channel PNG, meters = raw / 256, raw 0 invalid.
pub fn load_depth_png16(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let DynamicImage::ImageLuma16(buf) = open_image(path)? else {
        return Err(Error::format(path, "depth PNG must be 16-bit single-channel"));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let raw = Grid::from_vec(w, h, buf.into_raw())?;
    let values = raw.map(|&r| r as f64 / PNG16_SCALE);
    let valid = raw.map(|&r| r != 0);
    DepthMap::with_validity(values, &valid)
}

/// Encodes depth as `round(d * 256)`, clamped to `[1, 65535]`; invalid pixels become 0.
pub fn save_depth_png16(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = depth.dims();
    let raw: Vec<u16> = depth
        .values()
        .iter()
        .zip(depth.valid().iter())
        .map(|(&d, &ok)| if ok { (d * PNG16_SCALE).round().clamp(1.0, 65535.0) as u16 } else { 0 })
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized from dims");
    buf.save(path).map_err(image_err(path))
}

/// Loads depth by extension: `.png` as 16-bit PNG, anything else as a float map.
pub fn load_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    if has_extension(path, "png") {
        load_depth_png16(path)
    } else {
        load_depth_float_map(path)
    }
}

pub fn save_depth(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let path = path.as_ref();
    if has_extension(path, "png") {
        save_depth_png16(path, depth)
    } else {
        save_depth_float_map(path, depth)
    }
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// 8-bit PNG mask; nonzero pixels are sky.
pub fn load_sky_mask(path: impl AsRef<Path>) -> Result<Grid<bool>> {
    let path = path.as_ref();
    let DynamicImage::ImageLuma8(buf) = open_image(path)? else {
        return Err(Error::format(path, "sky mask must be an 8-bit single-channel PNG"));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    Grid::from_vec(w, h, buf.into_raw().into_iter().map(|v| v != 0).collect())
}

pub fn save_sky_mask(path: impl AsRef<Path>, mask: &Grid<bool>) -> Result<()> {
    let path = path.as_ref();
    let raw = mask.iter().map(|&s| if s { 255u8 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("buffer sized from dims");
    buf.save(path).map_err(image_err(path))
}

/// Loads a colour or grayscale image with intensities in `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().channel_count() <= 2 {
        let buf = img.to_luma32f();
        let plane = Grid::from_vec(w, h, buf.into_raw().into_iter().map(f64::from).collect())?;
        return Ok(Image::gray(plane));
    }
    let raw = img.to_rgb32f().into_raw();
    let planes = (0..3)
        .map(|c| Grid::from_vec(w, h, raw.iter().skip(c).step_by(3).map(|&v| v as f64).collect()))
        .collect::<Result<Vec<_>>>()?;
    Image::from_planes(planes)
}

/// Saves a 1- or 3-channel image as 8-bit PNG, clamping intensities to `[0, 1]`.
pub fn save_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = image.dims();
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match image.channels() {
        1 => {
            let raw = image.plane(0).iter().map(|&v| quantize(v)).collect();
            let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
                ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized from dims");
            buf.save(path).map_err(image_err(path))
        }
        3 => {
            let mut raw = Vec::with_capacity(3 * w * h);
            for i in 0..w * h {
                for plane in image.planes() {
                    raw.push(quantize(plane.as_slice()[i]));
                }
            }
            let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
                ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized from dims");
            buf.save(path).map_err(image_err(path))
        }
        n => Err(Error::invalid(format!("cannot save a {n}-channel image"))),
    }
}

/// Binary PGM (P5): 0 background, 255 edge.
pub fn encode_pgm(edges: &Grid<bool>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", edges.width(), edges.height()).into_bytes();
    out.extend(edges.iter().map(|&e| if e { 255u8 } else { 0 }));
    out
}

/// Parses a binary PGM with maxval 255; nonzero pixels are edges.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Grid<bool>> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::format(path, "only binary PGM (P5) is supported"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(path, format!("bad PGM field `{s}`")));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(Error::format(path, format!("PGM maxval must be 255, got {maxval}")));
    }
    let data = bytes.get(pos + 1..).unwrap_or_default();
    if data.len() != w * h {
        return Err(Error::format(path, format!("PGM payload is {} bytes, expected {}", data.len(), w * h)));
    }
    Grid::from_vec(w, h, data.iter().map(|&v| v != 0).collect())
}

pub fn save_edges_pgm(path: impl AsRef<Path>, edges: &EdgeMap) -> Result<()> {
    write(path.as_ref(), &encode_pgm(&edges.edges))
}

pub fn load_edges_pgm(path: impl AsRef<Path>) -> Result<Grid<bool>> {
    let path = path.as_ref();
    decode_pgm(&read(path)?, path)
}

/// One `x y z` line per point.
pub fn save_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for p in cloud.points() {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = String::from_utf8(read(path)?).map_err(|_| Error::format(path, "xyz file is not UTF-8"))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords: Vec<f64> = line
            .split_ascii_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("line {}: bad number", i + 1)))?;
        let [x, y, z] = coords[..] else {
            return Err(Error::format(path, format!("line {}: expected 3 coordinates", i + 1)));
        };
        points.push(Point3::new(x, y, z));
    }
    PointCloud::new(points)
}
