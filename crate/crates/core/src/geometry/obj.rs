//! Wavefront OBJ (`v`/`f` records only) and `x,y,z` CSV point files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::{GeometryError, PointSet, TriMesh};

#[derive(Debug, Clone, Copy)]
pub struct ObjOptions {
    /// Fan-triangulate polygons with more than three corners instead of rejecting them.
    pub triangulate: bool,
}

impl Default for ObjOptions {
    fn default() -> Self {
        Self { triangulate: true }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, opts: ObjOptions) -> Result<TriMesh, GeometryError> {
    let text = fs::read_to_string(path)?;
    parse_obj(&text, opts)
}

pub fn parse_obj(text: &str, opts: ObjOptions) -> Result<TriMesh, GeometryError> {
    let mut vertices = Vec::new();
    // Raw 1-based (or negative, relative) indices, resolved once all vertices are known.
    let mut raw_faces: Vec<(usize, [i64; 3])> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let tok = tokens.next().ok_or_else(|| GeometryError::Parse {
                        line: line_no,
                        msg: "vertex needs three coordinates".into(),
                    })?;
                    *slot = tok.parse().map_err(|_| GeometryError::Parse {
                        line: line_no,
                        msg: format!("bad coordinate `{tok}`"),
                    })?;
                }
                vertices.push(Point3::from(c));
            }
            Some("f") => {
                let corners = tokens
                    .map(|tok| {
                        let idx = tok.split('/').next().unwrap_or("");
                        idx.parse::<i64>().map_err(|_| GeometryError::Parse {
                            line: line_no,
                            msg: format!("bad face index `{tok}`"),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if corners.len() < 3 {
                    return Err(GeometryError::Parse {
                        line: line_no,
                        msg: "face needs at least three corners".into(),
                    });
                }
                if corners.len() > 3 && !opts.triangulate {
                    return Err(GeometryError::NonTriangle {
                        line: line_no,
                        arity: corners.len(),
                    });
                }
                // Relative indices refer to the vertices read so far.
                let resolve = |i: i64| {
                    if i < 0 {
                        vertices.len() as i64 + i + 1
                    } else {
                        i
                    }
                };
                for k in 1..corners.len() - 1 {
                    raw_faces.push((
                        line_no,
                        [
                            resolve(corners[0]),
                            resolve(corners[k]),
                            resolve(corners[k + 1]),
                        ],
                    ));
                }
            }
            _ => {}
        }
    }

    let n = vertices.len();
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (fi, (_, raw)) in raw_faces.iter().enumerate() {
        let mut f = [0usize; 3];
        for (slot, &i) in f.iter_mut().zip(raw) {
            if i < 1 || i as usize > n {
                return Err(GeometryError::IndexOutOfRange {
                    face: fi,
                    index: i,
                    count: n,
                });
            }
            *slot = i as usize - 1;
        }
        faces.push(f);
    }
    TriMesh::new(vertices, faces)
}

/// Writes `v`/`f` records. Coordinates use the shortest decimal that round-trips exactly.
pub fn write_obj(mesh: &TriMesh, out: &mut impl Write) -> std::io::Result<()> {
    let mut buf = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(buf, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(buf, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out.write_all(buf.as_bytes())
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    write_obj(mesh, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn parse_points_csv(text: &str) -> Result<Vec<Point3<f64>>, GeometryError> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(c) if c.len() == 3 => points.push(Point3::new(c[0], c[1], c[2])),
            // A non-numeric first line is a header.
            None if points.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(GeometryError::Parse {
                    line: lineno + 1,
                    msg: format!("expected `x,y,z`, got `{line}`"),
                })
            }
        }
    }
    Ok(points)
}

/// Loads a point set from `.csv` (`x,y,z` lines) or `.obj` (`v` records; faces
/// are used for one-ring neighbourhoods when present).
pub fn load_points(path: impl AsRef<Path>) -> Result<PointSet, GeometryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        Ok(PointSet::new(parse_points_csv(&text)?))
    } else {
        let mesh = parse_obj(&text, ObjOptions::default())?;
        if mesh.faces.is_empty() {
            Ok(PointSet::new(mesh.vertices))
        } else {
            Ok(PointSet::from_mesh(&mesh))
        }
    }
}

pub fn save_points_csv(
    points: &[Point3<f64>],
    path: impl AsRef<Path>,
) -> Result<(), GeometryError> {
    let mut buf = String::new();
    for p in points {
        let _ = writeln!(buf, "{:?},{:?},{:?}", p.x, p.y, p.z);
    }
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str =
        "# tetra\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";

    #[test]
    fn parses_tetrahedron() {
        let m = parse_obj(TETRA, ObjOptions::default()).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.faces.len(), 4);
        assert_eq!(m.faces[0], [0, 2, 1]);
    }

    #[test]
    fn index_out_of_range() {
        let text = TETRA.replace("f 2 3 4", "f 2 3 9");
        let err = parse_obj(&text, ObjOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            GeometryError::IndexOutOfRange { index: 9, .. }
        ));
    }

    #[test]
    fn quads_fan_or_reject() {
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let m = parse_obj(quad, ObjOptions { triangulate: true }).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        let err = parse_obj(quad, ObjOptions { triangulate: false }).unwrap_err();
        assert!(matches!(err, GeometryError::NonTriangle { arity: 4, .. }));
    }

    #[test]
    fn slashes_negative_indices_and_extras() {
        let text = "v 0 0 0 1 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf -3/1/1 -2//1 -1\n";
        let m = parse_obj(text, ObjOptions::default()).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn malformed_vertex() {
        let err = parse_obj("v 0 zero 0\n", ObjOptions::default()).unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 1, .. }));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = parse_obj(TETRA, ObjOptions::default()).unwrap();
        m.vertices[1] = Point3::new(0.1 + 0.2, 1.0 / 3.0, -7.123456789012345e-5);
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        let back = parse_obj(std::str::from_utf8(&buf).unwrap(), ObjOptions::default()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn point_cloud_obj_and_csv() {
        let cloud = TriMesh::from_points(vec![
            Point3::new(1.0, 2.0, 3.0),
            Point3::new(-1.5, 0.0, 2.25),
        ]);
        let mut buf = Vec::new();
        write_obj(&cloud, &mut buf).unwrap();
        let back = parse_obj(std::str::from_utf8(&buf).unwrap(), ObjOptions::default()).unwrap();
        assert_eq!(back, cloud);

        let pts = parse_points_csv("x,y,z\n1,2,3\n4.5, 5, 6\n").unwrap();
        assert_eq!(
            pts,
            vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.5, 5.0, 6.0)]
        );
        assert!(parse_points_csv("1,2\n").is_err());
    }
}
