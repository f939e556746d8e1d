//! File formats: binvox, the native JSON grid, and OBJ surface export.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::GridError;
use crate::grid::{Face, Frame, GridIndex, VoxelGrid, VoxelState};

/// Parses a binvox stream. Occupied voxels become `Keep`, empty ones
/// `Remove`; non-power-of-two inputs are padded with `Void`.
pub fn parse_binvox(bytes: &[u8]) -> Result<VoxelGrid, GridError> {
    let mut pos = 0;
    let mut next_line = || -> Result<String, GridError> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| GridError::Parse("unterminated header".into()))?;
        pos += end + 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| GridError::Parse("header is not ascii".into()))?;
        Ok(line.trim_end_matches('\r').to_string())
    };

    let magic = next_line()?;
    if !magic.starts_with("#binvox") {
        return Err(GridError::Parse(format!("bad magic line {magic:?}")));
    }
    let mut dim = None;
    let mut frame = Frame::default();
    loop {
        let line = next_line()?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("dim") => {
                let d: Vec<u32> = words
                    .map(|w| w.parse().map_err(|_| GridError::Parse(format!("bad dim {w:?}"))))
                    .collect::<Result<_, _>>()?;
                if d.len() != 3 || d[0] != d[1] || d[1] != d[2] || d[0] == 0 {
                    return Err(GridError::Parse(format!("expected cubic dims, got {d:?}")));
                }
                dim = Some(d[0]);
            }
            Some("translate") => {
                let t: Vec<f64> = words
                    .map(|w| w.parse().map_err(|_| GridError::Parse(format!("bad translate {w:?}"))))
                    .collect::<Result<_, _>>()?;
                if t.len() != 3 {
                    return Err(GridError::Parse("translate needs 3 values".into()));
                }
                frame.translate = [t[0], t[1], t[2]];
            }
            Some("scale") => {
                frame.scale = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| GridError::Parse("bad scale".into()))?;
            }
            Some("data") => break,
            Some(other) if other.starts_with('#') => {}
            None => {}
            Some(other) => return Err(GridError::Parse(format!("unknown header field {other:?}"))),
        }
    }
    let d = dim.ok_or_else(|| GridError::Parse("missing dim line".into()))?;
    let expected = (d as usize).pow(3);
    let data = &bytes[pos..];
    if !data.len().is_multiple_of(2) {
        return Err(GridError::Parse("odd number of run-length bytes".into()));
    }
    let mut found = 0usize;
    for pair in data.chunks_exact(2) {
        if pair[0] > 1 {
            return Err(GridError::InvalidValue(pair[0]));
        }
        found += pair[1] as usize;
    }
    if found != expected {
        return Err(GridError::LengthMismatch { expected, found });
    }
    let mut states = Vec::with_capacity(expected);
    for pair in data.chunks_exact(2) {
        let state = if pair[0] == 1 {
            VoxelState::Keep
        } else {
            VoxelState::Remove
        };
        states.extend(std::iter::repeat_n(state, pair[1] as usize));
    }
    let mut grid = VoxelGrid::padded_from(d, &states)?;
    grid.frame = frame;
    Ok(grid)
}

/// Serializes the unpadded source region as binvox. `Keep` becomes 1, every
/// other state 0.
pub fn serialize_binvox(grid: &VoxelGrid) -> Vec<u8> {
    let s = grid.source_dim;
    let f = grid.frame;
    let mut out = format!(
        "#binvox 1\ndim {s} {s} {s}\ntranslate {} {} {}\nscale {}\ndata\n",
        f.translate[0], f.translate[1], f.translate[2], f.scale
    )
    .into_bytes();
    let mut run: Option<(u8, u8)> = None;
    for x in 0..s {
        for z in 0..s {
            for y in 0..s {
                let v = u8::from(grid.get(GridIndex::new(x, y, z)) == VoxelState::Keep);
                run = match run {
                    Some((val, n)) if val == v && n < u8::MAX => Some((val, n + 1)),
                    Some((val, n)) => {
                        out.extend_from_slice(&[val, n]);
                        Some((v, 1))
                    }
                    None => Some((v, 1)),
                };
            }
        }
    }
    if let Some((val, n)) = run {
        out.extend_from_slice(&[val, n]);
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct GridJson {
    dim: u32,
    edge_len: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_dim: Option<u32>,
    rle: Vec<(VoxelState, usize)>,
}

pub fn grid_to_json(grid: &VoxelGrid) -> String {
    let mut rle: Vec<(VoxelState, usize)> = Vec::new();
    for &s in grid.states() {
        match rle.last_mut() {
            Some((st, n)) if *st == s => *n += 1,
            _ => rle.push((s, 1)),
        }
    }
    let doc = GridJson {
        dim: grid.dim(),
        edge_len: grid.edge_len,
        source_dim: (grid.source_dim != grid.dim()).then_some(grid.source_dim),
        rle,
    };
    serde_json::to_string(&doc).expect("grid json serialization")
}

pub fn grid_from_json(text: &str) -> Result<VoxelGrid, GridError> {
    let doc: GridJson = serde_json::from_str(text).map_err(|e| GridError::Json(e.to_string()))?;
    crate::grid::check_dim(doc.dim)?;
    let expected = (doc.dim as usize).pow(3);
    let found: usize = doc.rle.iter().map(|(_, n)| n).sum();
    if found != expected {
        return Err(GridError::LengthMismatch { expected, found });
    }
    let mut states = Vec::with_capacity(expected);
    for (s, n) in doc.rle {
        states.extend(std::iter::repeat_n(s, n));
    }
    let mut grid = VoxelGrid::from_states(doc.dim, states)?;
    if doc.edge_len.is_nan() || doc.edge_len <= 0.0 {
        return Err(GridError::Json(format!("edge_len must be positive, got {}", doc.edge_len)));
    }
    grid.edge_len = doc.edge_len;
    if let Some(s) = doc.source_dim {
        if s == 0 || s > doc.dim {
            return Err(GridError::Json(format!("source_dim {s} out of range")));
        }
        grid.source_dim = s;
    }
    Ok(grid)
}

/// Loads a grid, choosing the format from the leading bytes.
pub fn load_grid(bytes: &[u8]) -> Result<VoxelGrid, GridError> {
    if bytes.starts_with(b"#binvox") {
        parse_binvox(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| GridError::Json(e.to_string()))?;
        grid_from_json(text)
    }
}

/// Mesh statistics returned alongside the OBJ text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjStats {
    pub vertices: usize,
    pub faces: usize,
}

/// Writes one cube per selected voxel. Corner vertices are shared between
/// cubes; only faces not covered by another selected voxel are emitted.
pub fn export_obj(grid: &VoxelGrid, include_remove: bool) -> (String, ObjStats) {
    let selected = |s: VoxelState| s == VoxelState::Keep || (include_remove && s == VoxelState::Remove);
    let mut vertex_ids: HashMap<[u32; 3], usize> = HashMap::new();
    let mut vertices: Vec<[u32; 3]> = Vec::new();
    let mut faces: Vec<[usize; 4]> = Vec::new();
    let mut vid = |p: [u32; 3], vertices: &mut Vec<[u32; 3]>| -> usize {
        *vertex_ids.entry(p).or_insert_with(|| {
            vertices.push(p);
            vertices.len()
        })
    };
    let dim = grid.dim();
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                let i = GridIndex::new(x, y, z);
                if !selected(grid.get(i)) {
                    continue;
                }
                let mut ids = [0usize; 8];
                for (c, id) in ids.iter_mut().enumerate() {
                    let p = [x + (c as u32 & 1), y + ((c as u32 >> 1) & 1), z + ((c as u32 >> 2) & 1)];
                    *id = vid(p, &mut vertices);
                }
                for face in Face::ALL {
                    let exposed = match i.step(face, dim) {
                        Some(n) => !selected(grid.get(n)),
                        None => true,
                    };
                    if exposed {
                        faces.push(face_quad(face, &ids));
                    }
                }
            }
        }
    }
    let scale = grid.edge_len;
    let mut out = String::with_capacity(vertices.len() * 32 + faces.len() * 24);
    out.push_str("# voxel surface export\n");
    for v in &vertices {
        out.push_str(&format!(
            "v {} {} {}\n",
            v[0] as f64 * scale,
            v[1] as f64 * scale,
            v[2] as f64 * scale
        ));
    }
    for f in &faces {
        out.push_str(&format!("f {} {} {} {}\n", f[0], f[1], f[2], f[3]));
    }
    (
        out,
        ObjStats {
            vertices: vertices.len(),
            faces: faces.len(),
        },
    )
}

// Corner c has offsets (c&1, c>>1&1, c>>2&1). Quads wind counter-clockwise
// seen from outside.
fn face_quad(face: Face, ids: &[usize; 8]) -> [usize; 4] {
    let q = match face {
        Face::NegX => [0, 4, 6, 2],
        Face::PosX => [1, 3, 7, 5],
        Face::NegY => [0, 1, 5, 4],
        Face::PosY => [2, 6, 7, 3],
        Face::NegZ => [0, 2, 3, 1],
        Face::PosZ => [4, 5, 7, 6],
    };
    q.map(|c| ids[c])
}
