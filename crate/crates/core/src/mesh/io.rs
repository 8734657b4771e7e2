//! STL (binary and ASCII) and OBJ readers, plus writers for debug exports.

use std::io::Write;
use std::path::Path;

use super::{MeshError, TriangleMesh};
use crate::geom::Point;

const STL_HEADER_LEN: usize = 80;
const STL_TRIANGLE_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    StlAscii,
    StlBinary,
    Obj,
}

impl MeshFormat {
    /// Guesses the format from the extension, inspecting STL content to tell
    /// ASCII from binary.
    pub fn detect(path: &Path, bytes: &[u8]) -> Option<MeshFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(MeshFormat::Obj),
            "stl" => Some(if stl_is_binary(bytes) {
                MeshFormat::StlBinary
            } else {
                MeshFormat::StlAscii
            }),
            _ => None,
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stl-ascii" => Ok(MeshFormat::StlAscii),
            "stl-binary" => Ok(MeshFormat::StlBinary),
            "obj" => Ok(MeshFormat::Obj),
            other => Err(format!("unknown mesh format '{other}'")),
        }
    }
}

fn stl_is_binary(bytes: &[u8]) -> bool {
    if bytes.len() >= STL_HEADER_LEN + 4 {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if bytes.len() == STL_HEADER_LEN + 4 + n * STL_TRIANGLE_LEN {
            return true;
        }
    }
    // Binary files may also start with "solid"; size is the reliable signal.
    !bytes.trim_ascii_start().starts_with(b"solid")
}

/// Loads and cleans a mesh. `format = None` detects it from the path.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let format = match format.or_else(|| MeshFormat::detect(path, &bytes)) {
        Some(f) => f,
        None => {
            return Err(MeshError::Parse {
                location: path.display().to_string(),
                message: "cannot determine mesh format from extension".into(),
            })
        }
    };
    let mesh = match format {
        MeshFormat::Obj => {
            let text = std::str::from_utf8(&bytes).map_err(|e| MeshError::Parse {
                location: path.display().to_string(),
                message: e.to_string(),
            })?;
            read_obj(text)?
        }
        MeshFormat::StlBinary | MeshFormat::StlAscii => read_stl(&bytes, format)?,
    };
    for w in mesh.warnings() {
        log::warn!("{}: {w}", path.display());
    }
    Ok(mesh)
}

pub fn read_stl(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    let soup = match format {
        MeshFormat::StlBinary => parse_stl_binary(bytes)?,
        MeshFormat::StlAscii => {
            let text = std::str::from_utf8(bytes).map_err(|e| MeshError::Parse {
                location: "stl".into(),
                message: e.to_string(),
            })?;
            parse_stl_ascii(text)?
        }
        MeshFormat::Obj => unreachable!("read_stl called with OBJ format"),
    };
    let triangles = (0..soup.len() / 3).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
    TriangleMesh::new(soup, triangles)
}

fn parse_stl_binary(bytes: &[u8]) -> Result<Vec<Point>, MeshError> {
    let err = |message: String| MeshError::Parse {
        location: "binary stl".into(),
        message,
    };
    if bytes.len() < STL_HEADER_LEN + 4 {
        return Err(err(format!("file too short ({} bytes)", bytes.len())));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = STL_HEADER_LEN + 4 + count * STL_TRIANGLE_LEN;
    if bytes.len() < expected {
        return Err(err(format!("declares {count} triangles but holds {} bytes", bytes.len())));
    }
    let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    let mut points = Vec::with_capacity(count * 3);
    for i in 0..count {
        let base = STL_HEADER_LEN + 4 + i * STL_TRIANGLE_LEN + 12;
        for v in 0..3 {
            let o = base + v * 12;
            points.push(Point::new(f(o), f(o + 4), f(o + 8)));
        }
    }
    Ok(points)
}

fn parse_stl_ascii(text: &str) -> Result<Vec<Point>, MeshError> {
    let mut points = Vec::new();
    let mut in_facet = 0;
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("vertex") => {
                let coords: Vec<f64> = tok
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::Parse {
                        location: format!("line {}", lineno + 1),
                        message: e.to_string(),
                    })?;
                if coords.len() != 3 {
                    return Err(MeshError::Parse {
                        location: format!("line {}", lineno + 1),
                        message: format!("vertex needs 3 coordinates, found {}", coords.len()),
                    });
                }
                points.push(Point::new(coords[0], coords[1], coords[2]));
                in_facet += 1;
            }
            Some("endfacet") => {
                if in_facet != 3 {
                    return Err(MeshError::Parse {
                        location: format!("line {}", lineno + 1),
                        message: format!("facet with {in_facet} vertices"),
                    });
                }
                in_facet = 0;
            }
            Some("solid" | "facet" | "outer" | "endloop" | "endsolid") | None => {}
            Some(other) => {
                return Err(MeshError::Parse {
                    location: format!("line {}", lineno + 1),
                    message: format!("unexpected token '{other}'"),
                })
            }
        }
    }
    if points.len() % 3 != 0 {
        return Err(MeshError::Parse {
            location: "end of file".into(),
            message: "truncated facet".into(),
        });
    }
    Ok(points)
}

/// Reads `v` and `f` records; polygons are fan-triangulated and negative
/// (relative) indices are supported. Other records are ignored.
pub fn read_obj(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let location = || format!("line {}", lineno + 1);
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let coords: Vec<f64> = tok
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::Parse {
                        location: location(),
                        message: e.to_string(),
                    })?;
                if coords.len() != 3 {
                    return Err(MeshError::Parse {
                        location: location(),
                        message: "vertex needs 3 coordinates".into(),
                    });
                }
                vertices.push(Point::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| MeshError::Parse {
                        location: location(),
                        message: format!("bad face index '{t}'"),
                    })?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 {
                        return Err(MeshError::Parse {
                            location: location(),
                            message: format!("face index {i} out of range"),
                        });
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        location: location(),
                        message: "face needs at least 3 vertices".into(),
                    });
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn write_obj(mesh: &TriangleMesh, out: &mut impl Write) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn write_stl_binary(mesh: &TriangleMesh, out: &mut impl Write) -> std::io::Result<()> {
    let mut header = [0u8; STL_HEADER_LEN];
    let tag = b"graspforge binary stl";
    header[..tag.len()].copy_from_slice(tag);
    out.write_all(&header)?;
    out.write_all(&(mesh.len() as u32).to_le_bytes())?;
    for t in 0..mesh.len() {
        let n = mesh.face_normal(t);
        for c in [n.x, n.y, n.z] {
            out.write_all(&(c as f32).to_le_bytes())?;
        }
        for p in mesh.triangle_points(t) {
            for c in [p.x, p.y, p.z] {
                out.write_all(&(c as f32).to_le_bytes())?;
            }
        }
        out.write_all(&0u16.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_stl_ascii(mesh: &TriangleMesh, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "solid graspforge")?;
    for t in 0..mesh.len() {
        let n = mesh.face_normal(t);
        writeln!(out, "  facet normal {} {} {}", n.x, n.y, n.z)?;
        writeln!(out, "    outer loop")?;
        for p in mesh.triangle_points(t) {
            writeln!(out, "      vertex {} {} {}", p.x, p.y, p.z)?;
        }
        writeln!(out, "    endloop")?;
        writeln!(out, "  endfacet")?;
    }
    writeln!(out, "endsolid graspforge")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn obj_unit_cube() {
        let mesh = read_obj(CUBE_OBJ).unwrap();
        assert_eq!(mesh.len(), 12);
        assert!(mesh.is_watertight());
        assert!((mesh.com() - Point::new(0.5, 0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn obj_quads_and_relative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4/1/1 -3/2/1 -2/3/1 -1/4/1\n";
        let mesh = read_obj(text).unwrap();
        assert_eq!(mesh.len(), 2);
    }

    #[test]
    fn obj_errors() {
        assert!(matches!(read_obj("v 0 0\n"), Err(MeshError::Parse { .. })));
        assert!(matches!(read_obj("v 0 0 0\nf 1 2\n"), Err(MeshError::Parse { .. })));
        assert!(matches!(read_obj("# nothing\n"), Err(MeshError::Empty)));
    }

    #[test]
    fn stl_binary_and_ascii_roundtrip() {
        let cube = fixtures::cube(40.0);
        let mut bin = Vec::new();
        write_stl_binary(&cube, &mut bin).unwrap();
        assert_eq!(bin.len(), 84 + 50 * 12);
        let back = read_stl(&bin, MeshFormat::StlBinary).unwrap();
        assert_eq!(back.vertices().len(), 8);
        for t in 0..12 {
            assert_eq!(back.triangle_points(t), cube.triangle_points(t));
        }

        let mut ascii = Vec::new();
        write_stl_ascii(&cube, &mut ascii).unwrap();
        let back = read_stl(&ascii, MeshFormat::StlAscii).unwrap();
        assert_eq!(back.len(), 12);
        assert!((back.com() - cube.com()).norm() < 1e-9);
    }

    #[test]
    fn stl_truncated_is_parse_error() {
        let cube = fixtures::cube(1.0);
        let mut bin = Vec::new();
        write_stl_binary(&cube, &mut bin).unwrap();
        bin.truncate(200);
        assert!(matches!(read_stl(&bin, MeshFormat::StlBinary), Err(MeshError::Parse { .. })));
        assert!(matches!(
            read_stl(b"solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0\n", MeshFormat::StlAscii),
            Err(MeshError::Parse { .. })
        ));
    }

    #[test]
    fn load_detects_format() {
        let dir = tempfile::tempdir().unwrap();
        let cube = fixtures::cube(10.0);
        let obj = dir.path().join("c.obj");
        let mut f = std::fs::File::create(&obj).unwrap();
        write_obj(&cube, &mut f).unwrap();
        drop(f);
        assert_eq!(load_mesh(&obj, None).unwrap().len(), 12);

        let stl = dir.path().join("c.stl");
        let mut buf = Vec::new();
        write_stl_binary(&cube, &mut buf).unwrap();
        std::fs::write(&stl, &buf).unwrap();
        assert_eq!(MeshFormat::detect(&stl, &buf), Some(MeshFormat::StlBinary));
        assert_eq!(load_mesh(&stl, None).unwrap().len(), 12);

        assert!(matches!(load_mesh(dir.path().join("missing.obj"), None), Err(MeshError::Io { .. })));
    }
}
