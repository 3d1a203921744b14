//! OFF reader/writer. Layout: "OFF" header, "nv nf ne" counts line, nv
//! vertex lines, nf face lines ("3 i j k"); coordinates are printed with 9
//! significant digits so read(write(mesh)) preserves them to that precision
//! and connectivity exactly.

use super::TriangleMesh;
use crate::geom::Vec3;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OffError {
    #[error("line {line}: {what}")]
    Parse { line: usize, what: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Format with 9 significant digits.
fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{:.8e}", x);
    // prettify small exponents into plain decimal where exact
    match s.parse::<f64>() {
        Ok(_) => s,
        Err(_) => format!("{x}"),
    }
}

pub fn write_off(mesh: &TriangleMesh, sink: &mut dyn Write) -> std::io::Result<()> {
    writeln!(sink, "OFF")?;
    writeln!(sink, "{} {} 0", mesh.vertices.len(), mesh.triangles.len())?;
    for v in &mesh.vertices {
        writeln!(sink, "{} {} {}", fmt9(v[0]), fmt9(v[1]), fmt9(v[2]))?;
    }
    for t in &mesh.triangles {
        writeln!(sink, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn write_off_string(mesh: &TriangleMesh) -> String {
    let mut buf = Vec::new();
    write_off(mesh, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_off(text: &str) -> Result<TriangleMesh, OffError> {
    // token stream with line provenance; '#' starts a comment
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        for tok in line.split_whitespace() {
            tokens.push((i + 1, tok));
        }
    }
    let mut pos = 0usize;
    let mut next = |what: &str| -> Result<(usize, &str), OffError> {
        let t = tokens.get(pos).copied().ok_or_else(|| OffError::Parse {
            line: tokens.last().map_or(1, |(l, _)| *l),
            what: format!("unexpected end of file, expected {what}"),
        })?;
        pos += 1;
        Ok(t)
    };

    let (hline, header) = next("OFF header")?;
    if header != "OFF" {
        return Err(OffError::Parse {
            line: hline,
            what: format!("expected OFF header, found {header:?}"),
        });
    }
    let parse_usize = |(line, tok): (usize, &str)| -> Result<usize, OffError> {
        tok.parse().map_err(|_| OffError::Parse {
            line,
            what: format!("malformed count {tok:?}"),
        })
    };
    let parse_f64 = |(line, tok): (usize, &str)| -> Result<f64, OffError> {
        tok.parse().map_err(|_| OffError::Parse {
            line,
            what: format!("malformed coordinate {tok:?}"),
        })
    };
    let nv = parse_usize(next("vertex count")?)?;
    let nf = parse_usize(next("face count")?)?;
    let _ne = parse_usize(next("edge count")?)?;

    let mut mesh = TriangleMesh::default();
    for _ in 0..nv {
        let x = parse_f64(next("x")?)?;
        let y = parse_f64(next("y")?)?;
        let z = parse_f64(next("z")?)?;
        mesh.vertices.push(Vec3::new(x, y, z));
    }
    for _ in 0..nf {
        let (kline, ktok) = next("face vertex count")?;
        let k: usize = ktok.parse().map_err(|_| OffError::Parse {
            line: kline,
            what: format!("malformed face count {ktok:?}"),
        })?;
        if k < 3 {
            return Err(OffError::Parse {
                line: kline,
                what: format!("face with {k} vertices"),
            });
        }
        let mut idx = Vec::with_capacity(k);
        for _ in 0..k {
            let (line, tok) = next("face index")?;
            let v: usize = tok.parse().map_err(|_| OffError::Parse {
                line,
                what: format!("malformed index {tok:?}"),
            })?;
            if v >= nv {
                return Err(OffError::Parse {
                    line,
                    what: format!("index {v} out of range (nv = {nv})"),
                });
            }
            idx.push(v as u32);
        }
        // fan-triangulate polygonal faces
        for i in 1..k - 1 {
            mesh.triangles.push([idx[0], idx[i], idx[i + 1]]);
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> TriangleMesh {
        TriangleMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            triangles: vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
        }
    }

    #[test]
    fn tetra_roundtrip() {
        let m = tetra();
        let text = write_off_string(&m);
        let m2 = read_off(&text).unwrap();
        assert_eq!(m2.triangles, m.triangles);
        for (a, b) in m.vertices.iter().zip(&m2.vertices) {
            assert!((*a - *b).norm() < 1e-8 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn empty_mesh() {
        let text = write_off_string(&TriangleMesh::default());
        assert!(text.starts_with("OFF\n0 0 0"));
        let m = read_off(&text).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match read_off("NOTOFF\n1 0 0\n0 0 0\n") {
            Err(OffError::Parse { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
        match read_off("OFF\n1 0 0\n0 zz 0\n") {
            Err(OffError::Parse { line: 3, .. }) => {}
            other => panic!("expected coordinate error, got {other:?}"),
        }
        match read_off("OFF\n1 1 0\n0 0 0\n3 0 0 9\n") {
            Err(OffError::Parse { line: 4, .. }) => {}
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "OFF # header\n# a comment\n\n3 1 0\n0 0 0\n1 0 0 # inline\n0 1 0\n3 0 1 2\n";
        let m = read_off(text).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles.len(), 1);
    }

    #[test]
    fn quads_are_fanned() {
        let text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let m = read_off(text).unwrap();
        assert_eq!(m.triangles.len(), 2);
    }
}
