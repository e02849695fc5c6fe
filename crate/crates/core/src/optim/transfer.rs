use std::io::Write;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::geometry::{Cage, TriMesh};
use crate::mvc::{compute_mvc, deform, MvcConfig};

/// Corresponding vertex indices `(source, counterpart)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkPairs {
    pub pairs: Vec<(usize, usize)>,
}

impl LandmarkPairs {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    /// `(i, i)` for `i < n`.
    pub fn identity(n: usize) -> Self {
        Self::new((0..n).map(|i| (i, i)).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate(&self, n_source: usize, n_counterpart: usize) -> Result<(), OptimError> {
        for &(s, d) in &self.pairs {
            if s >= n_source {
                return Err(OptimError::LandmarkOutOfRange {
                    index: s,
                    count: n_source,
                });
            }
            if d >= n_counterpart {
                return Err(OptimError::LandmarkOutOfRange {
                    index: d,
                    count: n_counterpart,
                });
            }
        }
        Ok(())
    }

    /// Lines `src_index,dst_index`; blank lines, `#` comments and a non-numeric
    /// header line are skipped.
    pub fn parse_csv(text: &str) -> Result<Self, OptimError> {
        let mut pairs = Vec::new();
        for (k, fields) in csv_records(text) {
            let parsed: Result<Vec<usize>, _> = fields.iter().map(|f| f.parse::<usize>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => pairs.push((v[0], v[1])),
                Err(_) if k == 0 && pairs.is_empty() => continue,
                _ => {
                    return Err(OptimError::Parse {
                        line: k + 1,
                        msg: format!("expected `src_index,dst_index`, got `{}`", fields.join(",")),
                    })
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OptimError> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (s, d) in &self.pairs {
            writeln!(out, "{s},{d}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OptimError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Non-empty, non-comment lines split on commas, with 0-based line numbers.
fn csv_records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then(|| (k, line.split(',').map(str::trim).collect()))
    })
}

/// Lines `dx,dy,dz`, one per cage vertex.
pub fn parse_offsets_csv(text: &str) -> Result<Vec<Vector3<f64>>, OptimError> {
    let mut out = Vec::new();
    for (k, fields) in csv_records(text) {
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => out.push(Vector3::new(v[0], v[1], v[2])),
            Err(_) if k == 0 && out.is_empty() => continue,
            _ => {
                return Err(OptimError::Parse {
                    line: k + 1,
                    msg: format!("expected `dx,dy,dz`, got `{}`", fields.join(",")),
                })
            }
        }
    }
    Ok(out)
}

pub fn load_offsets(path: impl AsRef<Path>) -> Result<Vec<Vector3<f64>>, OptimError> {
    parse_offsets_csv(&std::fs::read_to_string(path)?)
}

/// Writes offsets with round-trip precision.
pub fn write_offsets_csv(offsets: &[Vector3<f64>], out: &mut impl Write) -> std::io::Result<()> {
    for d in offsets {
        writeln!(out, "{:?},{:?},{:?}", d.x, d.y, d.z)?;
    }
    Ok(())
}

pub fn save_offsets(offsets: &[Vector3<f64>], path: impl AsRef<Path>) -> Result<(), OptimError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_offsets_csv(offsets, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Deforms `novel` by moving `fitted` to `fitted + offsets`.
pub fn transfer(
    fitted: &Cage,
    offsets: &[Vector3<f64>],
    novel: &[Point3<f64>],
) -> Result<Vec<Point3<f64>>, OptimError> {
    if offsets.len() != fitted.len() {
        return Err(OptimError::Dimension(format!(
            "{} offsets for a cage of {} vertices",
            offsets.len(),
            fitted.len()
        )));
    }
    let mvc = compute_mvc(fitted, novel, &MvcConfig::for_cage(fitted))?;
    let moved: Vec<Point3<f64>> = fitted
        .vertices()
        .iter()
        .zip(offsets)
        .map(|(v, d)| v + d)
        .collect();
    Ok(deform(&mvc, &moved)?)
}

/// [`transfer`] keeping the connectivity of `novel`.
pub fn transfer_mesh(
    fitted: &Cage,
    offsets: &[Vector3<f64>],
    novel: &TriMesh,
) -> Result<TriMesh, OptimError> {
    Ok(TriMesh {
        vertices: transfer(fitted, offsets, &novel.vertices)?,
        faces: novel.faces.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landmarks_csv() {
        let l = LandmarkPairs::parse_csv("src,dst\n0,3\n# note\n\n5, 1\n").unwrap();
        assert_eq!(l.pairs, vec![(0, 3), (5, 1)]);
        assert!(l.validate(6, 4).is_ok());
        assert!(matches!(
            l.validate(5, 4),
            Err(OptimError::LandmarkOutOfRange { index: 5, count: 5 })
        ));
        assert!(LandmarkPairs::parse_csv("0,1\n2\n").is_err());
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert_eq!(
            LandmarkPairs::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap(),
            l
        );
    }

    #[test]
    fn offsets_round_trip() {
        let offs = vec![
            Vector3::new(0.1, -1e-17, 3.0),
            Vector3::new(1.0 / 3.0, 0.0, -2.5),
        ];
        let mut buf = Vec::new();
        write_offsets_csv(&offs, &mut buf).unwrap();
        assert_eq!(
            parse_offsets_csv(std::str::from_utf8(&buf).unwrap()).unwrap(),
            offs
        );
        assert!(parse_offsets_csv("1,2\n").is_err());
    }
}
