//! Grayscale raster (binary PGM) plus key/value sidecar, the layout used by
//! common map servers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::mapping::{Occupancy, TernaryGrid};
use crate::grid::GridGeometry;
use crate::Pose2D;

pub const OCCUPIED_THRESH: f64 = 0.65;
pub const FREE_THRESH: f64 = 0.196;

#[derive(Debug, Error)]
pub enum MapIoError {
    #[error("map i/o failed on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed map file: {0}")]
    MalformedHeader(String),
    #[error("map geometry mismatch: {0}")]
    GeometryMismatch(String),
}

/// Parsed sidecar contents.
#[derive(Clone, Debug, PartialEq)]
pub struct MapMetadata {
    pub image: String,
    pub resolution: f64,
    pub origin: Pose2D,
    pub negate: bool,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
}

fn with_ext(basename: &Path, ext: &str) -> PathBuf {
    let mut s = basename.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MapIoError + '_ {
    move |source| MapIoError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

/// Encodes the raster: `P5` header, then rows from the top (highest `y`).
pub fn encode_pgm(grid: &TernaryGrid) -> Vec<u8> {
    let g = &grid.geometry;
    let mut out = format!("P5\n{} {}\n255\n", g.width, g.height).into_bytes();
    out.reserve(g.len());
    for j in (0..g.height).rev() {
        for i in 0..g.width {
            out.push(grid.get(i, j).raster_value());
        }
    }
    out
}

pub fn encode_metadata(grid: &TernaryGrid, image: &str) -> String {
    let g = &grid.geometry;
    format!(
        "image: {image}\nresolution: {}\norigin: [{}, {}, {}]\nnegate: 0\noccupied_thresh: {OCCUPIED_THRESH}\nfree_thresh: {FREE_THRESH}\n",
        g.resolution, g.origin.x, g.origin.y, g.origin.theta
    )
}

/// Writes `<basename>.pgm` and `<basename>.yaml`.
pub fn save_map(grid: &TernaryGrid, basename: impl AsRef<Path>) -> Result<(), MapIoError> {
    let basename = basename.as_ref();
    if grid.geometry.is_empty() {
        return Err(MapIoError::GeometryMismatch("cannot save an empty grid".into()));
    }
    let pgm = with_ext(basename, "pgm");
    let yaml = with_ext(basename, "yaml");
    let image = pgm
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| MapIoError::MalformedHeader(format!("unusable file name {}", pgm.display())))?
        .to_owned();
    fs::File::create(&pgm)
        .and_then(|mut f| f.write_all(&encode_pgm(grid)))
        .map_err(io_err(&pgm))?;
    fs::write(&yaml, encode_metadata(grid, &image)).map_err(io_err(&yaml))?;
    Ok(())
}

pub fn parse_metadata(text: &str) -> Result<MapMetadata, MapIoError> {
    let bad = |m: String| MapIoError::MalformedHeader(m);
    let mut image = None;
    let mut resolution = None;
    let mut origin = None;
    let mut negate = false;
    let mut occupied_thresh = OCCUPIED_THRESH;
    let mut free_thresh = FREE_THRESH;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| bad(format!("expected `key: value`, got {line:?}")))?;
        let value = value.trim();
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("{key}: {v:?} is not a number")))
        };
        match key.trim() {
            "image" => image = Some(value.to_owned()),
            "resolution" => resolution = Some(num(value)?),
            "origin" => {
                let inner = value
                    .strip_prefix('[')
                    .and_then(|v| v.strip_suffix(']'))
                    .ok_or_else(|| bad(format!("origin must be [x, y, theta], got {value:?}")))?;
                let parts = inner.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
                let [x, y, theta] = parts[..] else {
                    return Err(bad(format!("origin needs three values, got {}", parts.len())));
                };
                origin = Some(Pose2D { x, y, theta });
            }
            "negate" => negate = num(value)? != 0.0,
            "occupied_thresh" => occupied_thresh = num(value)?,
            "free_thresh" => free_thresh = num(value)?,
            _ => {}
        }
    }
    let resolution = resolution.ok_or_else(|| bad("missing resolution".into()))?;
    if !(resolution > 0.0) {
        return Err(bad(format!("resolution must be positive, got {resolution}")));
    }
    Ok(MapMetadata {
        image: image.ok_or_else(|| bad("missing image".into()))?,
        resolution,
        origin: origin.ok_or_else(|| bad("missing origin".into()))?,
        negate,
        occupied_thresh,
        free_thresh,
    })
}

/// Decodes a binary PGM into `(width, height, rows top-first)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, &[u8]), MapIoError> {
    let bad = |m: &str| MapIoError::MalformedHeader(m.to_owned());
    let mut pos = 0;
    let mut token = || -> Result<&[u8], MapIoError> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("header ended early"));
        }
        Ok(&bytes[start..pos])
    };
    if token()? != b"P5" {
        return Err(bad("magic must be P5"));
    }
    let mut number = |what: &str| -> Result<usize, MapIoError> {
        std::str::from_utf8(token()?)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MapIoError::MalformedHeader(format!("bad {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    // Exactly one whitespace byte separates the header from the pixels.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing raster"));
    }
    let body = &bytes[pos + 1..];
    if body.len() != width * height {
        return Err(MapIoError::MalformedHeader(format!(
            "raster holds {} bytes, header declares {}x{}",
            body.len(),
            width,
            height
        )));
    }
    Ok((width, height, body))
}

/// Reads `<basename>.yaml` and the raster it names (relative to the
/// sidecar's directory).
pub fn load_map(basename: impl AsRef<Path>) -> Result<TernaryGrid, MapIoError> {
    let basename = basename.as_ref();
    let yaml = with_ext(basename, "yaml");
    let text = fs::read_to_string(&yaml).map_err(io_err(&yaml))?;
    let meta = parse_metadata(&text)?;
    let pgm = yaml
        .parent()
        .map(|d| d.join(&meta.image))
        .unwrap_or_else(|| PathBuf::from(&meta.image));
    let bytes = fs::read(&pgm).map_err(io_err(&pgm))?;
    let (width, height, body) = decode_pgm(&bytes)?;
    let geometry = GridGeometry {
        width,
        height,
        resolution: meta.resolution,
        origin: meta.origin,
    };
    let mut cells = vec![Occupancy::Unknown; width * height];
    for (row, chunk) in body.chunks_exact(width.max(1)).enumerate() {
        let j = height - 1 - row;
        for (i, &v) in chunk.iter().enumerate() {
            let v = if meta.negate { 255 - v } else { v };
            cells[geometry.index(i, j)] = Occupancy::from_raster_value(v);
        }
    }
    Ok(TernaryGrid { geometry, cells })
}

/// [`load_map`] that also requires the raster to match `expected`.
pub fn load_map_checked(
    basename: impl AsRef<Path>,
    expected: &GridGeometry,
) -> Result<TernaryGrid, MapIoError> {
    let grid = load_map(basename)?;
    if grid.geometry != *expected {
        return Err(MapIoError::GeometryMismatch(format!(
            "file is {}x{} @ {} m, expected {}x{} @ {} m",
            grid.geometry.width,
            grid.geometry.height,
            grid.geometry.resolution,
            expected.width,
            expected.height,
            expected.resolution
        )));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_from(width: usize, height: usize, kinds: &[u8]) -> TernaryGrid {
        let mut g = GridGeometry::new(width, height, 0.05 * (1 + kinds[0] % 7) as f64);
        g.origin = Pose2D {
            x: -1.5,
            y: 2.25,
            theta: 0.0,
        };
        TernaryGrid {
            geometry: g,
            cells: (0..width * height)
                .map(|k| match kinds[k % kinds.len()] % 3 {
                    0 => Occupancy::Free,
                    1 => Occupancy::Occupied,
                    _ => Occupancy::Unknown,
                })
                .collect(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn save_load_round_trip(w in 1usize..30, h in 1usize..30, kinds in proptest::collection::vec(any::<u8>(), 1..64)) {
            let dir = tempfile::tempdir().unwrap();
            let grid = grid_from(w, h, &kinds);
            let base = dir.path().join("m");
            save_map(&grid, &base).unwrap();
            prop_assert_eq!(load_map(&base).unwrap(), grid);
        }
    }

    #[test]
    fn truncated_raster_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let grid = grid_from(4, 3, &[0, 1, 2]);
        let base = dir.path().join("t");
        save_map(&grid, &base).unwrap();
        let pgm = dir.path().join("t.pgm");
        let mut bytes = fs::read(&pgm).unwrap();
        bytes.truncate(bytes.len() - 2);
        fs::write(&pgm, bytes).unwrap();
        assert!(matches!(load_map(&base), Err(MapIoError::MalformedHeader(_))));
    }

    #[test]
    fn missing_files_are_io_failures() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_map(dir.path().join("absent")),
            Err(MapIoError::IoFailure { .. })
        ));
    }

    #[test]
    fn geometry_check() {
        let dir = tempfile::tempdir().unwrap();
        let grid = grid_from(4, 3, &[0]);
        let base = dir.path().join("g");
        save_map(&grid, &base).unwrap();
        assert!(load_map_checked(&base, &grid.geometry).is_ok());
        let other = GridGeometry::new(5, 3, grid.geometry.resolution);
        assert!(matches!(
            load_map_checked(&base, &other),
            Err(MapIoError::GeometryMismatch(_))
        ));
    }
}
