use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use super::lab::{rgb_to_lab, WhitePoint};
use super::{PlaneImage, RgbImage};
use crate::error::{Error, Result};

/// Sample depth used when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a PNG/PPM/PGM (8 or 16 bit) as RGB normalized to `[0, 1]`.
/// Grayscale files are replicated into all three channels.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let img = open(path.as_ref())?.into_rgb32f();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = RgbImage::filled(h, w, [0.0; 3]);
    for (i, px) in img.pixels().enumerate() {
        for k in 0..3 {
            out.planes_mut()[k].data_mut()[i] = px.0[k].clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Load a single luminance plane.
///
/// Grayscale files are taken verbatim. Color files are reduced to their
/// normalized CIELAB lightness, which is how monochrome targets are derived
/// from color views.
pub fn read_plane(path: impl AsRef<Path>) -> Result<PlaneImage> {
    let img = open(path.as_ref())?;
    if img.color().has_color() {
        let rgb = read_rgb(path)?;
        return Ok(rgb_to_lab(&rgb, WhitePoint::D65)?.l);
    }
    let gray = img.to_luma32f();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    PlaneImage::from_vec(
        h,
        w,
        gray.into_raw()
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect(),
    )
}

fn quantize(v: f32, max: f32) -> f32 {
    (v.clamp(0.0, 1.0) * max).round()
}

fn save<P, C>(buf: ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::Pixel + image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Write RGB; the format follows the file extension.
pub fn write_rgb(path: impl AsRef<Path>, img: &RgbImage, depth: BitDepth) -> Result<()> {
    let (h, w) = img.dims();
    let path = path.as_ref();
    match depth {
        BitDepth::Eight => {
            let buf = ImageBuffer::<Rgb<u8>, _>::from_fn(w as u32, h as u32, |x, y| {
                let p = img.get(y as usize, x as usize);
                Rgb(p.map(|v| quantize(v, 255.0) as u8))
            });
            save(buf, path)
        }
        BitDepth::Sixteen => {
            let buf = ImageBuffer::<Rgb<u16>, _>::from_fn(w as u32, h as u32, |x, y| {
                let p = img.get(y as usize, x as usize);
                Rgb(p.map(|v| quantize(v, 65535.0) as u16))
            });
            save(buf, path)
        }
    }
}

pub fn write_plane(path: impl AsRef<Path>, img: &PlaneImage, depth: BitDepth) -> Result<()> {
    let (h, w) = img.dims();
    let path = path.as_ref();
    match depth {
        BitDepth::Eight => {
            let buf = ImageBuffer::<Luma<u8>, _>::from_fn(w as u32, h as u32, |x, y| {
                Luma([quantize(img.get(y as usize, x as usize), 255.0) as u8])
            });
            save(buf, path)
        }
        BitDepth::Sixteen => {
            let buf = ImageBuffer::<Luma<u16>, _>::from_fn(w as u32, h as u32, |x, y| {
                Luma([quantize(img.get(y as usize, x as usize), 65535.0) as u16])
            });
            save(buf, path)
        }
    }
}
