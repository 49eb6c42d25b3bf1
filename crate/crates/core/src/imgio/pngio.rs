//! 8/16-bit grayscale PNG decode and 16-bit encode.
//!
//! The processed store is uniformly 16-bit grayscale PNG, non-interlaced.
//! The writer rejects 8-bit buffers outright: dynamic-range normalization is
//! responsible for widening, not the encoder.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::imgio::{BitDepth, ImageBuffer, ImageIoError, SourceImageMeta};

pub fn read_png(path: &Path) -> Result<(ImageBuffer, SourceImageMeta), ImageIoError> {
    let file = File::open(path).map_err(|source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| map_png_error(path, e))?;
    let info = reader.info();

    if info.color_type != png::ColorType::Grayscale {
        return Err(ImageIoError::UnsupportedColor {
            path: path.to_path_buf(),
            detail: format!("{:?}", info.color_type),
        });
    }
    let bit_depth = match info.bit_depth {
        png::BitDepth::Eight => BitDepth::Eight,
        png::BitDepth::Sixteen => BitDepth::Sixteen,
        other => {
            return Err(ImageIoError::UnsupportedBitDepth {
                path: path.to_path_buf(),
                bits: other as u16,
            })
        }
    };

    let mut data = vec![0u8; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut data)
        .map_err(|e| map_png_error(path, e))?;
    data.truncate(frame.buffer_size());

    let samples = match bit_depth {
        BitDepth::Eight => data.iter().map(|&b| b as u16).collect(),
        // PNG stores 16-bit samples big-endian.
        BitDepth::Sixteen => data
            .chunks_exact(2)
            .map(|pair| u16::from_be_bytes([pair[0], pair[1]]))
            .collect(),
    };

    let buffer = ImageBuffer::new(frame.width, frame.height, bit_depth, samples)?;
    let meta = SourceImageMeta {
        photometric: None,
        stored_bits: bit_depth.bits(),
        path: path.to_path_buf(),
        rescale: None,
    };
    Ok((buffer, meta))
}

pub fn write_png(buffer: &ImageBuffer, path: &Path) -> Result<(), ImageIoError> {
    if buffer.bit_depth() != BitDepth::Sixteen {
        return Err(ImageIoError::NormalizeFirst);
    }
    let file = File::create(path).map_err(|source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let writer = BufWriter::new(file);
    let mut encoder = png::Encoder::new(writer, buffer.width(), buffer.height());
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut png_writer = encoder
        .write_header()
        .map_err(|e| map_png_encode_error(path, e))?;

    let mut bytes = Vec::with_capacity(buffer.samples().len() * 2);
    for &s in buffer.samples() {
        bytes.extend_from_slice(&s.to_be_bytes());
    }
    png_writer
        .write_image_data(&bytes)
        .map_err(|e| map_png_encode_error(path, e))?;
    png_writer
        .finish()
        .map_err(|e| map_png_encode_error(path, e))?;
    Ok(())
}

fn map_png_error(path: &Path, err: png::DecodingError) -> ImageIoError {
    match err {
        png::DecodingError::IoError(source) => ImageIoError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => ImageIoError::Malformed {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}

fn map_png_encode_error(path: &Path, err: png::EncodingError) -> ImageIoError {
    match err {
        png::EncodingError::IoError(source) => ImageIoError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => ImageIoError::Malformed {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}
