use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::{BinaryMask, FloatPlane, ImagingError, RasterImage, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormatKind {
    Png,
    Jpeg,
}

/// Decode a JPEG or PNG upload into a 3-channel image.
///
/// Images carrying an alpha channel are rejected; gray inputs are promoted to RGB.
pub fn decode_image(bytes: &[u8]) -> Result<(RasterImage, ImageFormatKind)> {
    let format = image::guess_format(bytes).map_err(|e| ImagingError::Decode(e.to_string()))?;
    let kind = match format {
        ImageFormat::Png => ImageFormatKind::Png,
        ImageFormat::Jpeg => ImageFormatKind::Jpeg,
        other => {
            return Err(ImagingError::InvalidInput(format!(
                "unsupported image format {other:?}; expected JPEG or PNG"
            )))
        }
    };
    let decoded =
        image::load_from_memory_with_format(bytes, format).map_err(|e| ImagingError::Decode(e.to_string()))?;
    if decoded.color().has_alpha() {
        return Err(ImagingError::InvalidInput("images with an alpha channel are not supported".into()));
    }
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok((RasterImage::new(w as usize, h as usize, 3, rgb.into_raw())?, kind))
}

fn png_bytes(data: &[u8], width: usize, height: usize, color: ExtendedColorType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(data, width as u32, height as u32, color)
        .map_err(|e| ImagingError::Encode(e.to_string()))?;
    Ok(out)
}

/// PNG with 1 (L8) or 3 (RGB8) channels, matching the image.
pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    let color = if img.channels() == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
    png_bytes(img.data(), img.width(), img.height(), color)
}

/// Single-channel PNG: background 0, foreground 255.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    encode_png(&mask.to_gray_image())
}

/// 16-bit gray PNG of a plane with values in [0, 1] (`round(v·65535)`).
pub fn encode_plane_png16(plane: &FloatPlane) -> Result<Vec<u8>> {
    if let Some(bad) = plane.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ImagingError::InvalidInput(format!("value {bad} outside [0, 1]")));
    }
    let bytes: Vec<u8> = plane
        .values()
        .iter()
        .flat_map(|&v| ((v * 65535.0).round() as u16).to_be_bytes())
        .collect();
    png_bytes(&bytes, plane.width(), plane.height(), ExtendedColorType::L16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{DynamicImage, GrayImage, RgbaImage};
    use std::io::Cursor;

    fn encode_dynamic(img: DynamicImage, fmt: ImageFormat) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, fmt).unwrap();
        buf.into_inner()
    }

    #[test]
    fn png_round_trip() {
        let img = RasterImage::from_fn_rgb(5, 3, |x, y| [x as u8 * 40, y as u8 * 60, 7]).unwrap();
        let (back, kind) = decode_image(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(kind, ImageFormatKind::Png);
        assert_eq!(back, img);
    }

    #[test]
    fn rejects_alpha() {
        let bytes = encode_dynamic(DynamicImage::ImageRgba8(RgbaImage::new(4, 4)), ImageFormat::Png);
        assert!(matches!(decode_image(&bytes), Err(ImagingError::InvalidInput(_))));
    }

    #[test]
    fn gray_png_is_promoted() {
        let bytes = encode_dynamic(DynamicImage::ImageLuma8(GrayImage::from_pixel(2, 2, image::Luma([9]))), ImageFormat::Png);
        let (img, _) = decode_image(&bytes).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.rgb(1, 1), [9, 9, 9]);
    }

    #[test]
    fn jpeg_decodes() {
        let rgb = image::RgbImage::from_pixel(16, 8, image::Rgb([120, 80, 40]));
        let bytes = encode_dynamic(DynamicImage::ImageRgb8(rgb), ImageFormat::Jpeg);
        let (img, kind) = decode_image(&bytes).unwrap();
        assert_eq!(kind, ImageFormatKind::Jpeg);
        assert_eq!((img.width(), img.height()), (16, 8));
    }

    #[test]
    fn rejects_garbage_and_other_formats() {
        assert!(decode_image(b"not an image").is_err());
        let gif_header = b"GIF89a\x01\x00\x01\x00\x00\x00\x00";
        assert!(matches!(decode_image(gif_header), Err(ImagingError::InvalidInput(_))));
    }

    #[test]
    fn mask_png_is_single_channel_binary() {
        let mask = BinaryMask::from_fn(6, 4, |x, _| x > 2);
        let bytes = encode_mask_png(&mask).unwrap();
        let decoded = image::load_from_memory(&bytes).unwrap();
        assert_eq!(decoded.color(), image::ColorType::L8);
        let luma = decoded.to_luma8();
        assert!(luma.pixels().all(|p| p[0] == 0 || p[0] == 255));
        assert_eq!(luma.get_pixel(5, 0)[0], 255);
    }

    #[test]
    fn plane16_encodes_extremes() {
        let plane = FloatPlane::new(2, 1, vec![0.0, 1.0]).unwrap();
        let decoded = image::load_from_memory(&encode_plane_png16(&plane).unwrap()).unwrap();
        let l16 = decoded.to_luma16();
        assert_eq!(l16.get_pixel(0, 0)[0], 0);
        assert_eq!(l16.get_pixel(1, 0)[0], 65535);
    }
}
