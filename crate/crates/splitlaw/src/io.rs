//! Line-oriented text format for point patterns.
//!
//! The header declares the space, then one atom per line:
//! `atom_id multiplicity` on discrete spaces, `x1 .. xd multiplicity` on
//! windows. Multi-part files carry a `parts n` line and `part m` separators.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::measure::{Location, PointMeasure, Space, Window};

fn write_header<W: Write>(w: &mut W, space: &Space) -> Result<()> {
    match space {
        Space::Discrete { atoms } => writeln!(w, "space discrete {atoms}")?,
        Space::Window(win) => {
            let mut fields = vec![format!("space window {}", win.dim())];
            fields.extend(win.lower.iter().map(|v| v.to_string()));
            fields.extend(win.upper.iter().map(|v| v.to_string()));
            writeln!(w, "{}", fields.join(" "))?;
        }
    }
    Ok(())
}

fn write_atoms<W: Write>(w: &mut W, mu: &PointMeasure) -> Result<()> {
    for (loc, m) in mu.atoms() {
        match loc {
            Location::Atom(i) => writeln!(w, "{i} {m}")?,
            Location::Point(x) => {
                let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
                writeln!(w, "{} {m}", coords.join(" "))?;
            }
        }
    }
    Ok(())
}

pub fn write_pattern<W: Write>(w: &mut W, space: &Space, mu: &PointMeasure) -> Result<()> {
    write_header(w, space)?;
    write_atoms(w, mu)
}

pub fn write_parts<W: Write>(w: &mut W, space: &Space, parts: &[PointMeasure]) -> Result<()> {
    write_header(w, space)?;
    writeln!(w, "parts {}", parts.len())?;
    for (i, part) in parts.iter().enumerate() {
        writeln!(w, "part {i}")?;
        write_atoms(w, part)?;
    }
    Ok(())
}

struct LineReader<R> {
    inner: R,
    line_no: usize,
}

impl<R: BufRead> LineReader<R> {
    fn next_line(&mut self) -> Result<Option<String>> {
        let mut buf = String::new();
        loop {
            buf.clear();
            if self.inner.read_line(&mut buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let t = buf.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(Some(t.to_string()));
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line_no, msg: msg.into() }
    }
}

fn parse_header<R: BufRead>(r: &mut LineReader<R>) -> Result<Space> {
    let line = r.next_line()?.ok_or_else(|| r.err("missing header"))?;
    let tok: Vec<&str> = line.split_whitespace().collect();
    match tok.as_slice() {
        ["space", "discrete", k] => {
            let atoms = k.parse().map_err(|_| r.err("bad atom count"))?;
            Ok(Space::Discrete { atoms })
        }
        ["space", "window", d, rest @ ..] => {
            let d: usize = d.parse().map_err(|_| r.err("bad dimension"))?;
            if rest.len() != 2 * d {
                return Err(r.err(format!("expected {} bounds, got {}", 2 * d, rest.len())));
            }
            let vals: Vec<f64> = rest
                .iter()
                .map(|s| s.parse().map_err(|_| r.err("bad bound")))
                .collect::<Result<_>>()?;
            Ok(Space::Window(Window::new(vals[..d].to_vec(), vals[d..].to_vec())?))
        }
        _ => Err(r.err("unrecognized header")),
    }
}

fn parse_atom_line<R: BufRead>(
    r: &LineReader<R>,
    space: &Space,
    line: &str,
) -> Result<(Location, u32)> {
    let tok: Vec<&str> = line.split_whitespace().collect();
    match space {
        Space::Discrete { atoms } => {
            if tok.len() != 2 {
                return Err(r.err("expected `atom_id multiplicity`"));
            }
            let id: usize = tok[0].parse().map_err(|_| r.err("bad atom id"))?;
            if id >= *atoms {
                return Err(r.err(format!("atom id {id} out of range")));
            }
            let m: u32 = tok[1].parse().map_err(|_| r.err("bad multiplicity"))?;
            Ok((Location::Atom(id), m))
        }
        Space::Window(win) => {
            let d = win.dim();
            if tok.len() != d + 1 {
                return Err(r.err(format!("expected {d} coordinates and a multiplicity")));
            }
            let coords: Vec<f64> = tok[..d]
                .iter()
                .map(|s| s.parse().map_err(|_| r.err("bad coordinate")))
                .collect::<Result<_>>()?;
            if !win.contains(&coords) {
                return Err(r.err("coordinates outside the window"));
            }
            let m: u32 = tok[d].parse().map_err(|_| r.err("bad multiplicity"))?;
            Ok((Location::Point(coords), m))
        }
    }
}

pub fn read_pattern<R: BufRead>(reader: R) -> Result<(Space, PointMeasure)> {
    let mut r = LineReader { inner: reader, line_no: 0 };
    let space = parse_header(&mut r)?;
    let mut atoms = Vec::new();
    while let Some(line) = r.next_line()? {
        atoms.push(parse_atom_line(&r, &space, &line)?);
    }
    Ok((space, PointMeasure::from_atoms(atoms)))
}

pub fn read_parts<R: BufRead>(reader: R) -> Result<(Space, Vec<PointMeasure>)> {
    let mut r = LineReader { inner: reader, line_no: 0 };
    let space = parse_header(&mut r)?;
    let line = r.next_line()?.ok_or_else(|| r.err("missing `parts` line"))?;
    let n: usize = line
        .strip_prefix("parts ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| r.err("expected `parts n`"))?;
    let mut parts: Vec<Vec<(Location, u32)>> = Vec::new();
    while let Some(line) = r.next_line()? {
        if let Some(idx) = line.strip_prefix("part ") {
            let idx: usize = idx.parse().map_err(|_| r.err("bad part index"))?;
            if idx != parts.len() {
                return Err(r.err("parts out of order"));
            }
            parts.push(Vec::new());
        } else {
            let cur = parts.last_mut().ok_or_else(|| r.err("atom before any `part`"))?;
            cur.push(parse_atom_line(&r, &space, &line)?);
        }
    }
    if parts.len() != n {
        return Err(r.err(format!("declared {n} parts, found {}", parts.len())));
    }
    Ok((space, parts.into_iter().map(PointMeasure::from_atoms).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_discrete() {
        let space = Space::Discrete { atoms: 3 };
        let mu = PointMeasure::from_counts(&[2, 0, 1]);
        let mut buf = Vec::new();
        write_pattern(&mut buf, &space, &mu).unwrap();
        let (s2, m2) = read_pattern(&buf[..]).unwrap();
        assert_eq!(s2, space);
        assert_eq!(m2, mu);
    }

    #[test]
    fn roundtrip_window_parts() {
        let space = Space::Window(Window::unit_square());
        let parts = vec![
            PointMeasure::from_atoms([(Location::point(&[0.125, 0.75]), 1)]),
            PointMeasure::zero(),
            PointMeasure::from_atoms([(Location::point(&[0.5, 0.5]), 2)]),
        ];
        let mut buf = Vec::new();
        write_parts(&mut buf, &space, &parts).unwrap();
        let (s2, p2) = read_parts(&buf[..]).unwrap();
        assert_eq!(s2, space);
        assert_eq!(p2, parts);
    }

    #[test]
    fn bad_atom_id_reports_line() {
        let text = "space discrete 2\n5 1\n";
        match read_pattern(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
