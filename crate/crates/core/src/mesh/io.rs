//! Plain-text mesh format.
//!
//! ```text
//! nv nt
//! x y            (nv lines)
//! v0 v1 v2 r     (nt lines, 0-based; r is the local refinement edge,
//!                 the edge opposite vertex vr)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::triangulation::Triangulation;
use crate::error::{Error, Result};

impl Triangulation {
    /// Serialises vertices with 17 significant digits so that reading the
    /// text back reproduces every coordinate bit for bit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.num_vertices(), self.num_elements()).unwrap();
        for p in self.vertices() {
            writeln!(s, "{:.16e} {:.16e}", p[0], p[1]).unwrap();
        }
        for t in self.triangles() {
            let v = t.vertices;
            writeln!(s, "{} {} {} {}", v[0], v[1], v[2], t.refinement_edge).unwrap();
        }
        s
    }

    /// Parses the text format. The result is treated as an initial mesh.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let head = parse_fields::<usize>(header, 2, line)?;
        let (nv, nt) = (head[0], head[1]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, l) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("expected {nv} vertex lines"),
            })?;
            let xy = parse_fields::<f64>(l, 2, line)?;
            vertices.push([xy[0], xy[1]]);
        }
        let mut conn = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (line, l) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("expected {nt} triangle lines"),
            })?;
            let f = parse_fields::<usize>(l, 4, line)?;
            conn.push(([f[0], f[1], f[2]], f[3]));
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                msg: "trailing content".into(),
            });
        }
        Triangulation::with_refinement_edges(vertices, &conn)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_fields<T: std::str::FromStr>(l: &str, n: usize, line: usize) -> Result<Vec<T>> {
    let out: Vec<T> = l
        .split_whitespace()
        .map(|s| s.parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line,
            msg: format!("cannot parse `{l}`"),
        })?;
    if out.len() != n {
        return Err(Error::Parse {
            line,
            msg: format!("expected {n} fields, found {}", out.len()),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builders;

    #[test]
    fn round_trip_is_bit_exact() {
        // refined meshes have coordinates like 1/3-ish midpoints of midpoints
        let t = builders::lshape().bisect(&[0, 3]).unwrap().bisect(&[1, 4, 7]).unwrap();
        let text = t.to_text();
        let back = Triangulation::from_text(&text).unwrap();
        assert_eq!(back.vertices().len(), t.vertices().len());
        for (a, b) in back.vertices().iter().zip(t.vertices()) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
        for (a, b) in back.triangles().iter().zip(t.triangles()) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.refinement_edge, b.refinement_edge);
        }
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn irrational_coordinates_round_trip() {
        let v = vec![[0.1, std::f64::consts::PI], [1.0 / 3.0, 0.0], [2.0f64.sqrt(), 1e-300]];
        let t = Triangulation::build_initial(v, &[[0, 1, 2]]).unwrap();
        let back = Triangulation::from_text(&t.to_text()).unwrap();
        assert_eq!(back.vertices(), t.vertices());
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(Triangulation::from_text(""), Err(Error::Parse { .. })));
        assert!(matches!(
            Triangulation::from_text("3 1\n0 0\n1 0\n0 1\n0 1 2\n"),
            Err(Error::Parse { line: 5, .. })
        ));
        assert!(matches!(
            Triangulation::from_text("3 1\n0 0\n1 0\n0 1\n0 1 2 5\n"),
            Err(Error::InvalidRefinementEdge { element: 0, edge: 5 })
        ));
    }
}
