use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::pgm::{read_pgm, write_pgm, GrayImage};
use crate::error::{Error, Result};
use crate::io::{load_matrix, save_matrix};
use crate::matrix::DenseMatrix;

/// Layout of a packed image batch. Column `j` of the matrix is image
/// `names[j]`, flattened row-major and scaled by `1 / maxval`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBatchMeta {
    pub width: usize,
    pub height: usize,
    pub count: usize,
    pub maxval: u16,
    pub names: Vec<String>,
}

impl ImageBatchMeta {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "width={}\nheight={}\ncount={}\nmaxval={}\n",
            self.width, self.height, self.count, self.maxval
        );
        for name in &self.names {
            let _ = writeln!(out, "name={name}");
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let (mut width, mut height, mut count, mut maxval) = (None, None, None, None);
        let mut names = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(idx + 1, format!("expected key=value, got {line:?}")))?;
            let number = || {
                value
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| err(idx + 1, format!("{key}: not a count: {value:?}")))
            };
            match key.trim() {
                "width" => width = Some(number()?),
                "height" => height = Some(number()?),
                "count" => count = Some(number()?),
                "maxval" => {
                    let v = number()?;
                    maxval = Some(
                        u16::try_from(v)
                            .ok()
                            .filter(|&m| m > 0)
                            .ok_or_else(|| err(idx + 1, format!("maxval out of range: {v}")))?,
                    )
                }
                "name" => names.push(value.to_string()),
                other => return Err(err(idx + 1, format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| err(0, format!("missing {k}"));
        let meta = Self {
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            count: count.ok_or_else(|| missing("count"))?,
            maxval: maxval.ok_or_else(|| missing("maxval"))?,
            names,
        };
        if meta.names.len() != meta.count {
            return Err(err(0, format!("count={} but {} names", meta.count, meta.names.len())));
        }
        Ok(meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_pgm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Packs every `*.pgm` in `dir` (sorted by file name) into one matrix.
pub fn pack_images(dir: &Path) -> Result<(DenseMatrix, ImageBatchMeta)> {
    let files = pgm_files(dir)?;
    if files.is_empty() {
        return Err(Error::Image {
            path: dir.to_path_buf(),
            msg: "no .pgm files found".into(),
        });
    }
    let images: Vec<GrayImage> = files.iter().map(|f| read_pgm(f)).collect::<Result<_>>()?;
    let first = &images[0];
    for (img, path) in images.iter().zip(&files) {
        if (img.width, img.height) != (first.width, first.height) {
            return Err(Error::Image {
                path: path.clone(),
                msg: format!(
                    "size {}x{} differs from {}x{}",
                    img.width, img.height, first.width, first.height
                ),
            });
        }
        if img.maxval != first.maxval {
            return Err(Error::Image {
                path: path.clone(),
                msg: format!("maxval {} differs from {}", img.maxval, first.maxval),
            });
        }
    }
    let scale = f64::from(first.maxval);
    let x = DenseMatrix::from_fn(first.width * first.height, images.len(), |i, j| {
        f64::from(images[j].pixels[i]) / scale
    });
    let names = files
        .iter()
        .map(|f| f.file_name().expect("listed files have names").to_string_lossy().into_owned())
        .collect();
    let meta = ImageBatchMeta {
        width: first.width,
        height: first.height,
        count: images.len(),
        maxval: first.maxval,
        names,
    };
    Ok((x, meta))
}

/// Clamps to `[0, 1]` and quantizes back to `0..=maxval`.
pub fn unpack_images(x: &DenseMatrix, meta: &ImageBatchMeta) -> Result<Vec<GrayImage>> {
    if x.rows() != meta.width * meta.height || x.cols() != meta.count {
        return Err(Error::ShapeMismatch {
            op: "images unpack",
            detail: format!(
                "matrix is {}x{}, meta describes {} images of {}x{}",
                x.rows(),
                x.cols(),
                meta.count,
                meta.width,
                meta.height
            ),
        });
    }
    let scale = f64::from(meta.maxval);
    (0..meta.count)
        .map(|j| {
            let pixels = x
                .column(j)
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * scale).round() as u16)
                .collect();
            GrayImage::new(meta.width, meta.height, meta.maxval, pixels)
        })
        .collect()
}

pub fn cmd_images_pack(dir: &Path, out_matrix: &Path, out_meta: &Path) -> Result<ImageBatchMeta> {
    let (x, meta) = pack_images(dir)?;
    save_matrix(&x, out_matrix)?;
    meta.save(out_meta)?;
    Ok(meta)
}

pub fn cmd_images_unpack(matrix: &Path, meta: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let meta = ImageBatchMeta::load(meta)?;
    for name in &meta.names {
        let plain = Path::new(name).file_name().is_some_and(|f| f == name.as_str());
        if !plain {
            return Err(Error::Image {
                path: PathBuf::from(name),
                msg: "image names must be plain file names".into(),
            });
        }
    }
    let x = load_matrix(matrix)?;
    let images = unpack_images(&x, &meta)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(images.len());
    for (img, name) in images.iter().zip(&meta.names) {
        let path = out_dir.join(name);
        write_pgm(img, &path)?;
        written.push(path);
    }
    Ok(written)
}
