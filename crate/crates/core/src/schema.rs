//! Column roles and kinds for the `[Z | X | Y]` data layout.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Continuous }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Binary }
    }
}

/// Covariates `Z`, treatments `X` and outcomes `Y`. Treatments listed in
/// `x0` precede (and may affect) `Z`; the remaining treatments follow it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub z: Vec<Column>,
    pub x: Vec<Column>,
    pub y: Vec<Column>,
    pub x0: Vec<usize>,
}

impl ColumnSchema {
    pub fn new(z: Vec<Column>, x: Vec<Column>, y: Vec<Column>) -> Result<Self> {
        let s = Self { z, x, y, x0: Vec::new() };
        s.validate()?;
        Ok(s)
    }

    /// Convenience constructor with generated names `Z1.., X1.., Y1..`.
    pub fn simple(z: &[ColumnKind], x: &[ColumnKind], y: &[ColumnKind]) -> Result<Self> {
        let cols = |p: &str, kinds: &[ColumnKind]| -> Vec<Column> {
            kinds.iter().enumerate().map(|(i, &kind)| Column { name: format!("{p}{}", i + 1), kind }).collect()
        };
        Self::new(cols("Z", z), cols("X", x), cols("Y", y))
    }

    pub fn with_x0(mut self, x0: Vec<usize>) -> Result<Self> {
        self.x0 = x0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.is_empty() || self.x.is_empty() || self.y.is_empty() {
            return Err(Error::Config("Z, X and Y each need at least one column".into()));
        }
        let mut seen = vec![false; self.x.len()];
        for &i in &self.x0 {
            if i >= self.x.len() || seen[i] {
                return Err(Error::Config(format!("bad or repeated X0 index {i}")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    pub fn d_z(&self) -> usize {
        self.z.len()
    }

    pub fn d_x(&self) -> usize {
        self.x.len()
    }

    pub fn d_y(&self) -> usize {
        self.y.len()
    }

    pub fn width(&self) -> usize {
        self.d_z() + self.d_x() + self.d_y()
    }

    pub fn has_x0(&self) -> bool {
        !self.x0.is_empty()
    }

    pub fn columns(&self) -> impl Iterator<Item = &Column> {
        self.z.iter().chain(&self.x).chain(&self.y)
    }

    /// Offsets of binary columns within `[Z | X]`.
    pub fn binary_past(&self) -> Vec<usize> {
        self.z.iter().chain(&self.x).enumerate().filter(|(_, c)| c.kind == ColumnKind::Binary).map(|(i, _)| i).collect()
    }

    /// Offsets of binary columns within `Y`.
    pub fn binary_outcomes(&self) -> Vec<usize> {
        self.y.iter().enumerate().filter(|(_, c)| c.kind == ColumnKind::Binary).map(|(i, _)| i).collect()
    }

    /// One `role,name,kind` line per column; role is `z`, `x`, `x0` or `y`.
    pub fn to_text(&self) -> String {
        let kind = |k: ColumnKind| match k {
            ColumnKind::Continuous => "continuous",
            ColumnKind::Binary => "binary",
        };
        let mut out = String::new();
        for c in &self.z {
            out.push_str(&format!("z,{},{}\n", c.name, kind(c.kind)));
        }
        for (i, c) in self.x.iter().enumerate() {
            let role = if self.x0.contains(&i) { "x0" } else { "x" };
            out.push_str(&format!("{role},{},{}\n", c.name, kind(c.kind)));
        }
        for c in &self.y {
            out.push_str(&format!("y,{},{}\n", c.name, kind(c.kind)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut z, mut x, mut y, mut x0) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let [role, name, kind] = parts[..] else {
                return Err(Error::Format(format!("schema line {}: expected role,name,kind", ln + 1)));
            };
            let kind = match kind {
                "continuous" => ColumnKind::Continuous,
                "binary" => ColumnKind::Binary,
                other => return Err(Error::Format(format!("schema line {}: unknown kind {other}", ln + 1))),
            };
            let col = Column { name: name.to_string(), kind };
            match role {
                "z" => z.push(col),
                "x" => x.push(col),
                "x0" => {
                    x0.push(x.len());
                    x.push(col);
                }
                "y" => y.push(col),
                other => return Err(Error::Format(format!("schema line {}: unknown role {other}", ln + 1))),
            }
        }
        Self::new(z, x, y)?.with_x0(x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let s = ColumnSchema::new(
            vec![Column::continuous("age"), Column::binary("smoker")],
            vec![Column::binary("dose0"), Column::continuous("dose1")],
            vec![Column::continuous("out")],
        )
        .unwrap()
        .with_x0(vec![0])
        .unwrap();
        assert_eq!(ColumnSchema::parse(&s.to_text()).unwrap(), s);
        assert_eq!(s.binary_past(), vec![1, 2]);
    }

    #[test]
    fn rejects_empty_blocks_and_bad_x0() {
        assert!(ColumnSchema::simple(&[], &[ColumnKind::Binary], &[ColumnKind::Continuous]).is_err());
        let s =
            ColumnSchema::simple(&[ColumnKind::Continuous], &[ColumnKind::Binary], &[ColumnKind::Continuous]).unwrap();
        assert!(s.with_x0(vec![1]).is_err());
        assert!(ColumnSchema::parse("w,a,continuous").is_err());
    }
}
