//! Self-describing text checkpoints.
//!
//! ```text
//! failurenet-checkpoint 1
//! kind lstm
//! seq_len 10
//! shape cell.w_x 256 3
//! params 25857
//! 1.23456789e-1
//! ...
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numfmt::exact;

pub const MAGIC: &str = "failurenet-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    /// Ordered `key value` header entries.
    pub fields: Vec<(String, String)>,
    /// Named tensor shapes, in parameter order.
    pub shapes: Vec<(String, Vec<usize>)>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.fields.push((key.to_string(), value.to_string()));
    }

    pub fn shape(&mut self, name: &str, dims: &[usize]) {
        self.shapes.push((name.to_string(), dims.to_vec()));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Incompatible(format!("checkpoint lacks '{key}'")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::Incompatible(format!("checkpoint field {key} = '{v}' is malformed")))
    }

    /// Space-separated list of floats stored under `key`.
    pub fn floats(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Incompatible(format!("checkpoint field {key} holds '{s}'")))
            })
            .collect()
    }

    /// A field holding exactly one float.
    pub fn float(&self, key: &str) -> Result<f64> {
        match self.floats(key)?.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Incompatible(format!("checkpoint field {key} must hold one value"))),
        }
    }

    pub fn set_floats(&mut self, key: &str, values: &[f64]) {
        let s: Vec<String> = values.iter().map(|&v| exact(v)).collect();
        self.set(key, s.join(" "));
    }

    /// Checks the declared shapes against the expected ones.
    pub fn expect_shapes(&self, expected: &[(String, Vec<usize>)]) -> Result<()> {
        if self.shapes != expected {
            return Err(Error::Incompatible(format!(
                "checkpoint shapes {:?} differ from the model's {:?}",
                self.shapes, expected
            )));
        }
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{MAGIC} {VERSION}")?;
        for (k, v) in &self.fields {
            writeln!(w, "{k} {v}")?;
        }
        for (name, dims) in &self.shapes {
            let d: Vec<String> = dims.iter().map(usize::to_string).collect();
            writeln!(w, "shape {name} {}", d.join(" "))?;
        }
        writeln!(w, "params {}", self.params.len())?;
        for &p in &self.params {
            writeln!(w, "{}", exact(p))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = || -> Result<Option<(usize, String)>> {
            match lines.next() {
                None => Ok(None),
                Some((i, l)) => Ok(Some((i + 1, l?))),
            }
        };
        match next()? {
            Some((_, l)) if l == format!("{MAGIC} {VERSION}") => {}
            Some((_, l)) if l.starts_with(MAGIC) => {
                return Err(Error::Incompatible(format!("unsupported checkpoint version: {l}")))
            }
            _ => return Err(Error::parse(1, "not a checkpoint file")),
        }
        let mut ck = Checkpoint::default();
        let count = loop {
            let Some((i, line)) = next()? else {
                return Err(Error::parse(0, "checkpoint ends before parameters"));
            };
            let (key, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
            match key {
                "params" => {
                    break rest
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(i, "bad parameter count"))?
                }
                "shape" => {
                    let mut parts = rest.split_whitespace();
                    let name = parts.next().ok_or_else(|| Error::parse(i, "shape without name"))?;
                    let dims = parts
                        .map(|d| d.parse::<usize>().map_err(|_| Error::parse(i, "bad dimension")))
                        .collect::<Result<Vec<_>>>()?;
                    ck.shape(name, &dims);
                }
                _ => ck.set(key, rest),
            }
        };
        ck.params.reserve(count);
        while let Some((i, line)) = next()? {
            if line.trim().is_empty() {
                continue;
            }
            let v: f64 = line.trim().parse().map_err(|_| Error::parse(i, "bad parameter value"))?;
            if !v.is_finite() {
                return Err(Error::parse(i, "non-finite parameter"));
            }
            ck.params.push(v);
        }
        if ck.params.len() != count {
            return Err(Error::Incompatible(format!(
                "declared {count} parameters, found {}",
                ck.params.len()
            )));
        }
        let declared: usize = ck.shapes.iter().map(|(_, d)| d.iter().product::<usize>()).sum();
        if !ck.shapes.is_empty() && declared != count {
            return Err(Error::Incompatible(format!(
                "shapes hold {declared} values but {count} parameters are stored"
            )));
        }
        Ok(ck)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f)).map_err(|e| match e {
            Error::Net(io) => Error::io(path, io),
            other => other,
        })
    }
}
