//! Raw volume files with a text sidecar, and PGM slice export.
//!
//! A volume `foo.raw` is stored as its little-endian samples in scan order
//! (x fastest) next to `foo.raw.hdr`:
//!
//! ```text
//! dims = 64 64 32
//! scalar = u8
//! kind = grey
//! voxel_size = 0.005
//! ```
//!
//! `kind` is one of `grey` (u8), `binary` (u8 0/1), `label` (u32) and
//! `wide` (f32); `voxel_size` is optional.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::morphology::{inner_boundary, StructuringElement};
use crate::volume::{BinaryVolume, Dims, GreyVolume, LabelVolume, WideVolume};

#[derive(Clone, Debug, PartialEq)]
pub enum VolumeData {
    Grey(GreyVolume),
    Binary(BinaryVolume),
    Label(LabelVolume),
    Wide(WideVolume),
}

impl VolumeData {
    pub fn dims(&self) -> Dims {
        match self {
            VolumeData::Grey(v) => v.dims(),
            VolumeData::Binary(v) => v.dims(),
            VolumeData::Label(v) => v.dims(),
            VolumeData::Wide(v) => v.dims(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            VolumeData::Grey(_) => "grey",
            VolumeData::Binary(_) => "binary",
            VolumeData::Label(_) => "label",
            VolumeData::Wide(_) => "wide",
        }
    }
}

/// Path of the sidecar header for `path`.
pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

pub fn write_volume(path: &Path, v: &VolumeData) -> Result<()> {
    let d = v.dims();
    let (bytes, scalar, voxel): (Vec<u8>, &str, Option<f64>) = match v {
        VolumeData::Grey(g) => (g.data().to_vec(), "u8", g.voxel_size()),
        VolumeData::Binary(b) => (b.to_flags(), "u8", None),
        VolumeData::Label(l) => (
            l.data().iter().flat_map(|x| x.to_le_bytes()).collect(),
            "u32",
            None,
        ),
        VolumeData::Wide(w) => (
            w.data().iter().flat_map(|x| x.to_le_bytes()).collect(),
            "f32",
            w.voxel_size(),
        ),
    };
    let mut hdr = format!(
        "dims = {} {} {}\nscalar = {scalar}\nkind = {}\n",
        d.nx,
        d.ny,
        d.nz,
        v.kind()
    );
    if let Some(s) = voxel {
        hdr.push_str(&format!("voxel_size = {s}\n"));
    }
    fs::write(path, bytes)?;
    fs::write(header_path(path), hdr)?;
    Ok(())
}

struct Header {
    dims: Dims,
    scalar: String,
    kind: String,
    voxel_size: Option<f64>,
}

fn read_header(path: &Path) -> Result<Header> {
    let hp = header_path(path);
    let text = fs::read_to_string(&hp)?;
    let bad = |m: String| Error::Format(format!("{}: {m}", hp.display()));
    let (mut dims, mut scalar, mut kind, mut voxel_size) = (None, None, None, None);
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
        let v = v.trim();
        match k.trim() {
            "dims" => {
                let n: Vec<usize> = v
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| bad(format!("bad dims `{v}`"))))
                    .collect::<Result<_>>()?;
                if n.len() != 3 {
                    return Err(bad(format!("dims needs three values, got `{v}`")));
                }
                dims = Some(Dims::new(n[0], n[1], n[2]).map_err(|e| bad(e.to_string()))?);
            }
            "scalar" => scalar = Some(v.to_string()),
            "kind" => kind = Some(v.to_string()),
            "voxel_size" => {
                voxel_size = Some(
                    v.parse()
                        .map_err(|_| bad(format!("bad voxel_size `{v}`")))?,
                )
            }
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    let dims = dims.ok_or_else(|| bad("missing dims".into()))?;
    let scalar = scalar.ok_or_else(|| bad("missing scalar".into()))?;
    let kind = kind.unwrap_or_else(|| match scalar.as_str() {
        "u32" => "label".into(),
        "f32" => "wide".into(),
        _ => "grey".into(),
    });
    Ok(Header {
        dims,
        scalar,
        kind,
        voxel_size,
    })
}

pub fn read_volume(path: &Path) -> Result<VolumeData> {
    let h = read_header(path)?;
    let bytes = fs::read(path)?;
    let n = h.dims.len();
    let width = match h.scalar.as_str() {
        "u8" => 1,
        "u32" | "f32" => 4,
        s => return Err(Error::Format(format!("unsupported scalar `{s}`"))),
    };
    if bytes.len() != n * width {
        return Err(Error::Format(format!(
            "{}: expected {} bytes for {:?} {}, found {}",
            path.display(),
            n * width,
            h.dims.as_tuple(),
            h.scalar,
            bytes.len()
        )));
    }
    let words = |b: &[u8]| -> Vec<[u8; 4]> {
        b.chunks_exact(4)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect()
    };
    Ok(match (h.kind.as_str(), h.scalar.as_str()) {
        ("grey", "u8") => {
            VolumeData::Grey(GreyVolume::from_vec(h.dims, bytes)?.with_voxel_size(h.voxel_size))
        }
        ("binary", "u8") => VolumeData::Binary(BinaryVolume::from_flags(h.dims, &bytes)?),
        ("label", "u32") => VolumeData::Label(LabelVolume::from_vec(
            h.dims,
            words(&bytes).into_iter().map(u32::from_le_bytes).collect(),
        )?),
        ("wide", "f32") => VolumeData::Wide(
            WideVolume::from_vec(
                h.dims,
                words(&bytes).into_iter().map(f32::from_le_bytes).collect(),
            )?
            .with_voxel_size(h.voxel_size),
        ),
        (k, s) => {
            return Err(Error::Format(format!(
                "kind `{k}` cannot be stored as `{s}`"
            )))
        }
    })
}

pub fn read_grey(path: &Path) -> Result<GreyVolume> {
    match read_volume(path)? {
        VolumeData::Grey(g) => Ok(g),
        other => Err(Error::Format(format!(
            "{}: expected a grey volume, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

/// Reads a mask; label volumes are accepted as their nonzero set.
pub fn read_binary(path: &Path) -> Result<BinaryVolume> {
    match read_volume(path)? {
        VolumeData::Binary(b) => Ok(b),
        VolumeData::Label(l) => Ok(l.nonzero()),
        other => Err(Error::Format(format!(
            "{}: expected a binary volume, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

pub fn read_label(path: &Path) -> Result<LabelVolume> {
    match read_volume(path)? {
        VolumeData::Label(l) => Ok(l),
        other => Err(Error::Format(format!(
            "{}: expected a label volume, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

/// Grey slice `z` as row-major bytes.
pub fn grey_slice(v: &GreyVolume, z: usize) -> Result<Vec<u8>> {
    let d = v.dims();
    if z >= d.nz {
        return Err(Error::pre(format!("slice {z} out of range 0..{}", d.nz)));
    }
    Ok(v.data()[z * d.slice_len()..(z + 1) * d.slice_len()].to_vec())
}

/// Grey slice `z` with the inner boundary of `mask` (26-connected unit
/// element, outside counted as foreground) drawn at 255.
pub fn overlay_slice(v: &GreyVolume, mask: &BinaryVolume, z: usize) -> Result<Vec<u8>> {
    v.dims().ensure_same(&mask.dims())?;
    let mut px = grey_slice(v, z)?;
    let boundary = inner_boundary(mask, &StructuringElement::cube(1))?;
    let off = z * v.dims().slice_len();
    for (i, p) in px.iter_mut().enumerate() {
        if boundary.get_index(off + i) {
            *p = 255;
        }
    }
    Ok(px)
}

/// Binary PGM (P5) image.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::pre("pixel count does not match image size"));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

pub fn export_slice(path: &Path, v: &GreyVolume, z: usize) -> Result<()> {
    let d = v.dims();
    write_pgm(path, d.nx, d.ny, &grey_slice(v, z)?)
}

pub fn export_overlay(path: &Path, v: &GreyVolume, mask: &BinaryVolume, z: usize) -> Result<()> {
    let d = v.dims();
    write_pgm(path, d.nx, d.ny, &overlay_slice(v, mask, z)?)
}
