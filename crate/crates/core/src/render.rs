//! Rasterization of microstructures to RGB images and binary PPM output.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::blocks::Microstructure;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::wells::{Family, GradientLabel, Variant};

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];

/// Label colors: magenta/orange for horizontal laminates, cyan/green for
/// vertical ones and shades of black for unresolved regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorMap {
    pub horizontal_plus: Rgb,
    pub horizontal_minus: Rgb,
    pub vertical_plus: Rgb,
    pub vertical_minus: Rgb,
    /// Gray level added per depth level of an unresolved region, capped at
    /// `unresolved_max`; depth 0 is black.
    pub unresolved_step: u8,
    pub unresolved_max: u8,
    pub background: Rgb,
}

impl Default for ColorMap {
    fn default() -> Self {
        ColorMap {
            horizontal_plus: [255, 0, 255],
            horizontal_minus: [255, 165, 0],
            vertical_plus: [0, 255, 255],
            vertical_minus: [0, 160, 0],
            unresolved_step: 12,
            unresolved_max: 96,
            background: WHITE,
        }
    }
}

impl ColorMap {
    pub fn color(&self, label: &GradientLabel) -> Rgb {
        match (label.family, label.variant) {
            (Family::Horizontal, Variant::Minus) => self.horizontal_minus,
            (Family::Horizontal, _) => self.horizontal_plus,
            (Family::Vertical, Variant::Minus) => self.vertical_minus,
            (Family::Vertical, _) => self.vertical_plus,
            (Family::Unresolved, _) => {
                let g = (u32::from(self.unresolved_step) * label.depth.min(255)).min(u32::from(self.unresolved_max)) as u8;
                [g, g, g]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }
}

/// Colors each pixel by the region containing its center.
pub fn rasterize(ms: &Microstructure, width: usize, height: usize, colors: &ColorMap) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!("image size {width}x{height} is empty")));
    }
    let d = *ms.domain();
    let pixels: Vec<Rgb> = (0..height)
        .into_par_iter()
        .flat_map_iter(|row| {
            let y = d.y1 - (row as f64 + 0.5) / height as f64 * d.l2();
            (0..width).map(move |col| {
                let x = d.x0 + (col as f64 + 0.5) / width as f64 * d.l1();
                ms.locate(Point::new(x, y)).map_or(colors.background, |(label, _)| colors.color(&label))
            })
        })
        .collect();
    Ok(Image { width, height, pixels })
}

pub fn write_ppm<W: Write>(mut w: W, img: &Image) -> Result<()> {
    write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads the binary PPM files written by [`write_ppm`] (maxval 255).
pub fn read_ppm<R: Read>(mut r: R) -> Result<Image> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < buf.len() && buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Io("truncated PPM header".into()));
        }
        fields.push(String::from_utf8_lossy(&buf[start..pos]).into_owned());
    }
    pos += 1;
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Io(format!("bad PPM header field {s:?}")));
    if fields[0] != "P6" || parse(&fields[3])? != 255 {
        return Err(Error::Io("only P6 with maxval 255 is supported".into()));
    }
    let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
    let data = buf.get(pos..).unwrap_or(&[]);
    if data.len() != 3 * width * height {
        return Err(Error::Io(format!("expected {} pixel bytes, found {}", 3 * width * height, data.len())));
    }
    let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(Image { width, height, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_white_pixel() {
        let img = Image { width: 1, height: 1, pixels: vec![WHITE] };
        let mut out = Vec::new();
        write_ppm(&mut out, &img).unwrap();
        assert_eq!(out, b"P6\n1 1\n255\n\xff\xff\xff");
        assert_eq!(read_ppm(&out[..]).unwrap(), img);
    }

    #[test]
    fn unresolved_shading_is_total() {
        let c = ColorMap::default();
        assert_eq!(c.color(&GradientLabel::unresolved(0)), [0, 0, 0]);
        assert_eq!(c.color(&GradientLabel::unresolved(2)), [24, 24, 24]);
        assert_eq!(c.color(&GradientLabel::unresolved(u32::MAX)), [96, 96, 96]);
    }
}
