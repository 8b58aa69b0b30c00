//! Plain-text container for reduced bases.
//!
//! ```text
//! rbfv-basis 1
//! level,catalytic_nodes,unknowns,species,diffusion,v_in,dim
//! <values>
//! traces            (catalytic_nodes rows, unknowns columns, row-major)
//! y0_trace          (species rows)
//! sigma
//! nodes
//! groups            (one row per unknown)
//! linear_part       ("none" or one value per species)
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a saved basis
//! reloads bit-identically.

use std::io::{BufRead, Write};
use std::time::Duration;

use nalgebra::DMatrix;

use super::ReducedBasis;
use crate::error::{Error, Result};

const MAGIC: &str = "rbfv-basis 1";

/// Metadata stored with a basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisHeader {
    pub level: Option<u32>,
    pub diffusion: f64,
    pub v_in: f64,
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_row<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    if line.trim().is_empty() {
        return Ok(Vec::new());
    }
    line.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Format(format!("cannot parse value '{t}'")))
        })
        .collect()
}

struct Lines<R> {
    inner: std::io::Lines<R>,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self, what: &str) -> Result<String> {
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(Error::Format(format!("unexpected end of file, expected {what}"))),
        }
    }

    fn section(&mut self, name: &str) -> Result<()> {
        let line = self.next(name)?;
        if line.trim() != name {
            return Err(Error::Format(format!("expected section '{name}', found '{line}'")));
        }
        Ok(())
    }
}

impl ReducedBasis {
    pub fn write_to(&self, header: &BasisHeader, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "level,catalytic_nodes,unknowns,species,diffusion,v_in,dim")?;
        let level = header.level.map(|l| l.to_string()).unwrap_or_else(|| "-".into());
        writeln!(
            w,
            "{level},{},{},{},{},{},{}",
            self.catalytic_count(),
            self.unknowns(),
            self.species_count(),
            header.diffusion,
            header.v_in,
            self.dim
        )?;
        writeln!(w, "traces")?;
        for row in self.traces.row_iter() {
            writeln!(w, "{}", join(row.iter()))?;
        }
        writeln!(w, "y0_trace")?;
        for t in &self.y0_trace {
            writeln!(w, "{}", join(t))?;
        }
        writeln!(w, "sigma")?;
        writeln!(w, "{}", join(&self.sigma))?;
        writeln!(w, "nodes")?;
        writeln!(w, "{}", join(&self.nodes))?;
        writeln!(w, "groups")?;
        for g in &self.groups {
            writeln!(w, "{}", join(g))?;
        }
        writeln!(w, "linear_part")?;
        match &self.constant_linear_part {
            Some(c) => writeln!(w, "{}", join(c))?,
            None => writeln!(w, "none")?,
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<(Self, BasisHeader)> {
        let mut lines = Lines { inner: r.lines() };
        if lines.next("header")?.trim() != MAGIC {
            return Err(Error::Format("not a basis file".into()));
        }
        lines.next("column names")?;
        let meta: Vec<String> = lines.next("metadata")?.split(',').map(|s| s.trim().to_string()).collect();
        if meta.len() != 7 {
            return Err(Error::Format(format!("expected 7 metadata fields, got {}", meta.len())));
        }
        let num = |i: usize| -> Result<usize> {
            meta[i]
                .parse()
                .map_err(|_| Error::Format(format!("bad count '{}'", meta[i])))
        };
        let float = |i: usize| -> Result<f64> {
            meta[i]
                .parse()
                .map_err(|_| Error::Format(format!("bad value '{}'", meta[i])))
        };
        let level = if meta[0] == "-" { None } else { Some(num(0)? as u32) };
        let (n_cat, m, n_species, dim) = (num(1)?, num(2)?, num(3)?, num(6)?);
        let header = BasisHeader {
            level,
            diffusion: float(4)?,
            v_in: float(5)?,
        };

        let expect_len = |v: &Vec<f64>, n: usize, what: &str| -> Result<()> {
            if v.len() != n {
                return Err(Error::Format(format!("{what}: expected {n} values, got {}", v.len())));
            }
            Ok(())
        };

        lines.section("traces")?;
        let mut data = Vec::with_capacity(n_cat * m);
        for _ in 0..n_cat {
            let row: Vec<f64> = parse_row(&lines.next("trace row")?)?;
            expect_len(&row, m, "trace row")?;
            data.extend(row);
        }
        let traces = DMatrix::from_row_slice(n_cat, m, &data);

        lines.section("y0_trace")?;
        let y0_trace = (0..n_species)
            .map(|_| {
                let row: Vec<f64> = parse_row(&lines.next("y0 row")?)?;
                expect_len(&row, n_cat, "y0 row")?;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;

        lines.section("sigma")?;
        let sigma: Vec<f64> = parse_row(&lines.next("sigma")?)?;
        expect_len(&sigma, n_cat, "sigma")?;

        lines.section("nodes")?;
        let nodes: Vec<usize> = parse_row(&lines.next("nodes")?)?;
        if nodes.len() != n_cat || nodes.iter().any(|&n| n >= dim) {
            return Err(Error::Format("invalid node list".into()));
        }

        lines.section("groups")?;
        let groups = (0..m)
            .map(|_| parse_row::<usize>(&lines.next("group")?))
            .collect::<Result<Vec<_>>>()?;

        lines.section("linear_part")?;
        let lp = lines.next("linear part")?;
        let constant_linear_part = if lp.trim() == "none" {
            None
        } else {
            let c: Vec<f64> = parse_row(&lp)?;
            expect_len(&c, n_species, "linear part")?;
            Some(c)
        };

        Ok((
            Self {
                traces,
                groups,
                y0_trace,
                sigma,
                nodes,
                dim,
                constant_linear_part,
                fields: None,
                offline_time: Duration::ZERO,
            },
            header,
        ))
    }

    pub fn save(&self, header: &BasisHeader, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(header, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<(Self, BasisHeader)> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
