use super::{file_error, IoError, Scaling};
use geocv_core::mesh::Point2;
use std::path::Path;

/// Closed rings (first vertex repeated last); the first ring is the exterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Vec<Point2>>,
}

impl Polygon {
    pub fn transformed(&self, scaling: &Scaling) -> Polygon {
        Polygon { rings: self.rings.iter().map(|r| r.iter().map(|&p| scaling.apply(p)).collect()).collect() }
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn error<T>(&self, message: impl Into<String>) -> Result<T, IoError> {
        Err(IoError::Wkt { offset: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), IoError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            self.error(format!("expected `{c}`"))
        }
    }

    fn number(&mut self) -> Result<f64, IoError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(rest.len());
        match rest[..len].parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos += len;
                Ok(v)
            }
            _ => self.error("expected a number"),
        }
    }
}

/// Parses `POLYGON((x y, ...), (x y, ...))`.
pub fn parse_polygon(text: &str) -> Result<Polygon, IoError> {
    let mut c = Cursor { text, pos: 0 };
    c.skip_ws();
    let keyword = "POLYGON";
    if !c.text[c.pos..].get(..keyword.len()).is_some_and(|k| k.eq_ignore_ascii_case(keyword)) {
        return c.error("expected POLYGON");
    }
    c.pos += keyword.len();
    c.expect('(')?;
    let mut rings = Vec::new();
    loop {
        let start = c.pos;
        c.expect('(')?;
        let mut ring = Vec::new();
        loop {
            let x = c.number()?;
            let y = c.number()?;
            ring.push(Point2::new(x, y));
            match c.peek() {
                Some(',') => c.pos += 1,
                Some(')') => {
                    c.pos += 1;
                    break;
                }
                _ => return c.error("expected `,` or `)`"),
            }
        }
        if ring.len() < 4 {
            return Err(IoError::Wkt { offset: start, message: "ring needs at least 4 vertices".into() });
        }
        if ring.first() != ring.last() {
            return Err(IoError::Wkt { offset: start, message: "ring is not closed".into() });
        }
        rings.push(ring);
        match c.peek() {
            Some(',') => c.pos += 1,
            Some(')') => {
                c.pos += 1;
                break;
            }
            _ => return c.error("expected `,` or `)`"),
        }
    }
    if c.peek().is_some() {
        return c.error("trailing characters");
    }
    Ok(Polygon { rings })
}

/// Reads a WKT polygon file and maps it into the dataset's scaled coordinates.
pub fn load_polygon(path: &Path, scaling: Option<&Scaling>) -> Result<Polygon, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_error(path))?;
    let polygon = parse_polygon(&text)?;
    Ok(match scaling {
        Some(s) => polygon.transformed(s),
        None => polygon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_triangle() {
        let p = parse_polygon("POLYGON((0 0,1 0,1 1,0 0))").unwrap();
        assert_eq!(p.rings.len(), 1);
        assert_eq!(p.rings[0].len(), 4);
        assert_eq!(p.rings[0][2], Point2::new(1.0, 1.0));
    }

    #[test]
    fn holes_and_case() {
        let p = parse_polygon(" polygon ( (0 0, 4 0, 4 4, 0 4, 0 0), (1 1, 2 1, 2 2, 1 1) ) ").unwrap();
        assert_eq!(p.rings.len(), 2);
    }

    #[test]
    fn errors_report_offsets() {
        match parse_polygon("POLYGON((0 0,1 0,1 1,0 1))") {
            Err(IoError::Wkt { offset, message }) => {
                assert_eq!(offset, 8);
                assert!(message.contains("closed"));
            }
            other => panic!("{other:?}"),
        }
        match parse_polygon("POLYGON((0 0,1 x,1 1,0 0))") {
            Err(IoError::Wkt { offset, .. }) => assert_eq!(offset, 15),
            other => panic!("{other:?}"),
        }
        assert!(parse_polygon("LINESTRING(0 0, 1 1)").is_err());
        assert!(parse_polygon("POLYGON((0 0,1 0,1 1,0 0)) extra").is_err());
    }
}
