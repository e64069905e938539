//! OBJ / PLY mesh files and the JSON sidecars (labels, landmarks).
//!
//! Only geometry is read: normals, colors and texture coordinates are
//! skipped. Output is positions plus triangles.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ply_rs::ply::{DefaultElement, Property};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::{Mesh, RegionLabeling};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
        }
    }
}

/// Reads an OBJ or PLY file and validates it.
///
/// Meshes with defects (degenerate faces, non-manifold edges, orientation
/// conflicts) are rejected with the full defect list.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let mesh = load_mesh_unchecked(path)?;
    let report = mesh.validate();
    if !report.is_clean() {
        return Err(Error::InvalidMesh {
            defects: report.defects,
        });
    }
    Ok(mesh)
}

/// Reads a mesh file without running validation.
pub fn load_mesh_unchecked(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let (vertices, triangles) = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            read_obj(BufReader::new(file), path)?
        }
        MeshFormat::Ply => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            read_ply(BufReader::new(file), path)?
        }
    };
    Mesh::new(vertices, triangles)
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

type RawMesh = (Vec<Vec3>, Vec<[usize; 3]>);

/// Parses `v` and `f` records. Polygons are fan-triangulated in file order;
/// negative (relative) indices are supported.
pub fn read_obj(reader: impl BufRead, path: &Path) -> Result<RawMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    *c = tokens
                        .next()
                        .and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| {
                            parse_err(path, format!("line {}: bad vertex record", lineno + 1))
                        })?;
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tokens {
                    let idx = t.split('/').next().unwrap_or("");
                    let i: i64 = idx.parse().map_err(|_| {
                        parse_err(path, format!("line {}: bad face index `{t}`", lineno + 1))
                    })?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 {
                        return Err(parse_err(
                            path,
                            format!("line {}: face index {i} out of range", lineno + 1),
                        ));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(parse_err(
                        path,
                        format!("line {}: face with fewer than 3 vertices", lineno + 1),
                    ));
                }
                for k in 1..poly.len() - 1 {
                    triangles.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<i64>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListInt(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUInt(v) => v.iter().map(|&x| x as i64).collect(),
        _ => return None,
    })
}

pub fn read_ply(mut reader: impl BufRead, path: &Path) -> Result<RawMesh> {
    let parser = ply_rs::parser::Parser::<DefaultElement>::new();
    let ply = parser
        .read_ply(&mut reader)
        .map_err(|e| parse_err(path, e.to_string()))?;

    let mut vertices = Vec::new();
    if let Some(elements) = ply.payload.get("vertex") {
        vertices.reserve(elements.len());
        for (i, el) in elements.iter().enumerate() {
            let get = |name: &str| {
                el.get(name)
                    .and_then(scalar)
                    .ok_or_else(|| parse_err(path, format!("vertex {i}: missing `{name}`")))
            };
            vertices.push(Vec3::new(get("x")?, get("y")?, get("z")?));
        }
    }

    let mut triangles = Vec::new();
    if let Some(elements) = ply.payload.get("face") {
        triangles.reserve(elements.len());
        for (i, el) in elements.iter().enumerate() {
            let list = el
                .get("vertex_indices")
                .or_else(|| el.get("vertex_index"))
                .and_then(index_list)
                .ok_or_else(|| parse_err(path, format!("face {i}: missing vertex_indices")))?;
            if list.len() < 3 || list.iter().any(|&x| x < 0) {
                return Err(parse_err(path, format!("face {i}: invalid index list")));
            }
            for k in 1..list.len() - 1 {
                triangles.push([list[0] as usize, list[k] as usize, list[k + 1] as usize]);
            }
        }
    }
    Ok((vertices, triangles))
}

/// Writes positions and triangles; the format follows the file extension.
/// PLY output is binary little-endian.
pub fn save_mesh(path: impl AsRef<Path>, vertices: &[Vec3], triangles: &[[usize; 3]]) -> Result<()> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        MeshFormat::Obj => write_obj(&mut w, vertices, triangles),
        MeshFormat::Ply => write_ply(&mut w, vertices, triangles),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

pub fn write_obj(w: &mut impl Write, vertices: &[Vec3], triangles: &[[usize; 3]]) -> std::io::Result<()> {
    for v in vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// Binary little-endian PLY with double coordinates and `uchar`/`uint`
/// face lists.
pub fn write_ply(w: &mut impl Write, vertices: &[Vec3], triangles: &[[usize; 3]]) -> std::io::Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        vertices.len(),
        triangles.len()
    )?;
    for v in vertices {
        for c in [v.x, v.y, v.z] {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for t in triangles {
        w.write_all(&[3u8])?;
        for &i in t {
            let i = u32::try_from(i).map_err(|_| {
                std::io::Error::new(std::io::ErrorKind::InvalidInput, "vertex index exceeds u32")
            })?;
            w.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<RegionLabeling> {
    read_json(path)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &RegionLabeling) -> Result<()> {
    write_json(path, labels)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::io::Cursor;

    #[test]
    fn single_triangle_obj() {
        let text = "# tri\nv 0 0 0\nv 3 0 0\nv 0 4 0\nvn 0 0 1\nf 1//1 2//1 3//1\n";
        let (v, t) = read_obj(Cursor::new(text), Path::new("t.obj")).unwrap();
        let m = Mesh::new(v, t).unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.face_count(), 1);
        assert!((m.mean_edge_length() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn obj_quads_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n";
        let (_, t) = read_obj(Cursor::new(text), Path::new("q.obj")).unwrap();
        assert_eq!(t, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_bad_records_are_parse_errors() {
        for text in ["v 0 0\n", "v 0 0 0\nf 1 2\n", "v 0 0 0\nf 0 1 1\n", "f a b c\n"] {
            let err = read_obj(Cursor::new(text), Path::new("bad.obj")).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{text:?}: {err}");
        }
    }

    #[test]
    fn ascii_ply_is_read() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let (v, t) = read_ply(Cursor::new(text), Path::new("t.ply")).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(t, vec![[0, 1, 2]]);
    }

    #[test]
    fn files_round_trip_through_both_formats() {
        let cube = fixtures::unit_cube();
        let dir = tempfile::tempdir().unwrap();
        for name in ["cube.obj", "cube.ply"] {
            let path = dir.path().join(name);
            save_mesh(&path, cube.vertices(), cube.triangles()).unwrap();
            let back = load_mesh(&path).unwrap();
            assert_eq!(back.vertices(), cube.vertices());
            assert_eq!(back.triangles(), cube.triangles());
            let report = back.validate();
            assert_eq!(report.boundary_loop_count, 0);
        }
    }

    #[test]
    fn non_manifold_file_is_rejected_with_defects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fin.obj");
        std::fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 0.5 1 0\nv 0.5 -1 0\nv 0.5 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n",
        )
        .unwrap();
        match load_mesh(&path) {
            Err(Error::InvalidMesh { defects }) => assert!(!defects.is_empty()),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn unknown_extension_is_rejected() {
        assert!(matches!(
            load_mesh("mesh.stl"),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn labels_json_uses_capital_k() {
        let labels = RegionLabeling::new(2, vec![1, 2, 0]);
        let text = serde_json::to_string(&labels).unwrap();
        assert_eq!(text, r#"{"K":2,"face_labels":[1,2,0]}"#);
    }
}
