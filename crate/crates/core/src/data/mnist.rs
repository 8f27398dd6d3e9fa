//! MNIST in the IDX format: a big-endian `u32` magic (2051 for images,
//! 2049 for labels), big-endian `u32` dimension sizes, then raw `u8` data.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MNIST_PIXELS: usize = 28 * 28;
pub const MNIST_CLASSES: usize = 10;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    let header = |o| be_u32(bytes, o).ok_or_else(|| Error::data(path, "truncated IDX header"));
    let magic = header(0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::data(
            path,
            format!("bad magic number {magic}, expected {IMAGE_MAGIC} for images"),
        ));
    }
    let count = header(4)? as usize;
    let rows = header(8)? as usize;
    let cols = header(12)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::data(
            path,
            format!("truncated image data: {} of {need} bytes", body.len()),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let header = |o| be_u32(bytes, o).ok_or_else(|| Error::data(path, "truncated IDX header"));
    let magic = header(0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::data(
            path,
            format!("bad magic number {magic}, expected {LABEL_MAGIC} for labels"),
        ));
    }
    let count = header(4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::data(
            path,
            format!("truncated label data: {} of {count} bytes", body.len()),
        ));
    }
    let labels = body[..count].to_vec();
    if let Some((i, &l)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= MNIST_CLASSES)
    {
        return Err(Error::data(path, format!("label {l} at index {i} is outside 0..=9")));
    }
    Ok(labels)
}

/// Accepts both `train-images-idx3-ubyte` and `train-images.idx3-ubyte`.
fn locate(dir: &Path, stem: &str, kind: &str) -> Result<PathBuf> {
    let candidates = [
        dir.join(format!("{stem}-{kind}")),
        dir.join(format!("{stem}.{kind}")),
    ];
    candidates
        .iter()
        .find(|p| p.is_file())
        .cloned()
        .ok_or_else(|| Error::data(&candidates[0], "MNIST file not found"))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::data(path, e.to_string()))
}

fn load_split(dir: &Path, prefix: &str, split: Split) -> Result<Dataset> {
    let img_path = locate(dir, &format!("{prefix}-images"), "idx3-ubyte")?;
    let lbl_path = locate(dir, &format!("{prefix}-labels"), "idx1-ubyte")?;
    let images = parse_idx_images(&read(&img_path)?, &img_path)?;
    let labels = parse_idx_labels(&read(&lbl_path)?, &lbl_path)?;
    if images.rows * images.cols != MNIST_PIXELS {
        return Err(Error::data(
            &img_path,
            format!("unexpected image size {}x{}", images.rows, images.cols),
        ));
    }
    if images.count != labels.len() {
        return Err(Error::data(
            &lbl_path,
            format!("{} labels for {} images", labels.len(), images.count),
        ));
    }
    if images.count == 0 {
        return Err(Error::data(&img_path, "no images"));
    }
    let features = Matrix::new(
        images.count,
        MNIST_PIXELS,
        images.pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )?;
    let mut targets = Matrix::zeros(images.count, MNIST_CLASSES);
    for (i, &l) in labels.iter().enumerate() {
        targets.set(i, l as usize, 1.0);
    }
    Dataset::new(features, targets, split)
}

/// Loads the standard 60k/10k split from `dir`. Pixels are scaled to
/// `[0, 1]` and labels one-hot encoded.
pub fn load_mnist(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let train = load_split(dir, "train", Split::Train)?;
    let validation = load_split(dir, "t10k", Split::Validation)?;
    Ok((train, validation))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(count: u32, rows: u32, cols: u32, fill: u8) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGE_MAGIC, count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend(std::iter::repeat_n(fill, (count * rows * cols) as usize));
        b
    }

    fn labels(ls: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [LABEL_MAGIC, ls.len() as u32] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(ls);
        b
    }

    #[test]
    fn parses_headers() {
        let p = Path::new("x");
        let img = parse_idx_images(&images(3, 28, 28, 7), p).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (3, 28, 28));
        assert_eq!(img.pixels.len(), 3 * 784);
        assert_eq!(parse_idx_labels(&labels(&[0, 9, 4]), p).unwrap(), vec![0, 9, 4]);
    }

    #[test]
    fn rejects_bad_files() {
        let p = Path::new("x");
        let mut bad = images(1, 28, 28, 0);
        bad[3] = 0x02; // 2050
        assert!(parse_idx_images(&bad, p).is_err());
        assert!(parse_idx_images(&labels(&[1]), p).is_err());
        let mut short = images(2, 28, 28, 0);
        short.truncate(short.len() - 1);
        assert!(parse_idx_images(&short, p).is_err());
        assert!(parse_idx_images(&[0, 0], p).is_err());
        assert!(parse_idx_labels(&labels(&[3, 10]), p).is_err());
        let mut lshort = labels(&[1, 2, 3]);
        lshort.pop();
        assert!(parse_idx_labels(&lshort, p).is_err());
    }

    #[test]
    fn loads_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train-images-idx3-ubyte"), images(4, 28, 28, 255)).unwrap();
        std::fs::write(dir.path().join("train-labels-idx1-ubyte"), labels(&[1, 2, 3, 4])).unwrap();
        std::fs::write(dir.path().join("t10k-images.idx3-ubyte"), images(2, 28, 28, 51)).unwrap();
        std::fs::write(dir.path().join("t10k-labels.idx1-ubyte"), labels(&[0, 9])).unwrap();
        let (train, val) = load_mnist(dir.path()).unwrap();
        assert_eq!(train.features.shape(), (4, 784));
        assert!(train.features.as_slice().iter().all(|&v| v == 1.0));
        assert!((val.features.get(1, 5) - 0.2).abs() < 1e-15);
        assert_eq!(val.targets.row(1)[9], 1.0);
        assert_eq!(val.split, Split::Validation);
    }

    #[test]
    fn missing_files_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_mnist(dir.path()), Err(Error::Data { .. })));
    }
}
