//! Versioned whitespace-separated text formats. Each file starts with a
//! header line `HJBPOD-<KIND> v1 ...`; every numeric block follows on its own
//! line. Floats are written in shortest round-trip form, so a save/load
//! cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::StaggeredState;
use crate::grid::CavityGrid;
use crate::scalar::Real;

pub const VERSION: &str = "v1";

/// Line-oriented writer collecting the whole file in memory.
#[derive(Default)]
pub struct TextWriter {
    buf: String,
}

impl TextWriter {
    pub fn new(tag: &str, fields: &[String]) -> Self {
        let mut w = Self::default();
        w.buf.push_str(tag);
        w.buf.push(' ');
        w.buf.push_str(VERSION);
        for f in fields {
            w.buf.push(' ');
            w.buf.push_str(f);
        }
        w.buf.push('\n');
        w
    }

    pub fn values<T: Real>(&mut self, values: &[T]) -> &mut Self {
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.buf.push(' ');
            }
            write!(self.buf, "{v:e}").expect("write to String");
        }
        self.buf.push('\n');
        self
    }

    pub fn indices(&mut self, values: &[usize]) -> &mut Self {
        let line: Vec<String> = values.iter().map(usize::to_string).collect();
        self.buf.push_str(&line.join(" "));
        self.buf.push('\n');
        self
    }

    pub fn line(&mut self, text: &str) -> &mut Self {
        self.buf.push_str(text);
        self.buf.push('\n');
        self
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.buf).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Reader over the lines of a file produced by [`TextWriter`].
pub struct TextReader {
    path: PathBuf,
    lines: Vec<String>,
    next: usize,
    header: Vec<String>,
}

impl TextReader {
    /// Opens `path` and checks the header tag and version.
    pub fn open(path: &Path, tag: &str) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(path, &text, tag)
    }

    pub fn parse(path: &Path, text: &str, tag: &str) -> Result<Self> {
        let lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let mut reader = Self {
            path: path.to_path_buf(),
            lines,
            next: 0,
            header: Vec::new(),
        };
        let first = reader.next_line()?;
        let header: Vec<String> = first.split_whitespace().map(str::to_owned).collect();
        if header.first().map(String::as_str) != Some(tag) {
            return Err(reader.format(format!("expected `{tag}` header")));
        }
        match header.get(1) {
            Some(v) if v == VERSION => {}
            other => {
                return Err(Error::Version {
                    path: reader.path.clone(),
                    expected: VERSION,
                    found: other.cloned().unwrap_or_default(),
                })
            }
        }
        reader.header = header[2..].to_vec();
        Ok(reader)
    }

    pub fn format(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            reason: reason.into(),
        }
    }

    /// Header fields after tag and version.
    pub fn header_field<F: FromStr>(&self, i: usize, name: &str) -> Result<F> {
        self.header
            .get(i)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.format(format!("bad or missing header field `{name}`")))
    }

    fn next_line(&mut self) -> Result<String> {
        let line = self
            .lines
            .get(self.next)
            .cloned()
            .ok_or_else(|| self.format(format!("truncated at line {}", self.next + 1)))?;
        self.next += 1;
        Ok(line)
    }

    /// Next line parsed as exactly `n` values.
    pub fn values<F: FromStr>(&mut self, n: usize) -> Result<Vec<F>> {
        let lineno = self.next + 1;
        let line = self.next_line()?;
        let out: Vec<F> = line
            .split_whitespace()
            .map(|tok| tok.parse::<F>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.format(format!("unparsable number on line {lineno}")))?;
        if out.len() != n {
            return Err(self.format(format!("line {lineno}: expected {n} values, found {}", out.len())));
        }
        Ok(out)
    }

    /// Next line as `key value...`, checking the key.
    pub fn keyed<F: FromStr>(&mut self, key: &str, n: usize) -> Result<Vec<F>> {
        let lineno = self.next + 1;
        let line = self.next_line()?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(self.format(format!("line {lineno}: expected key `{key}`")));
        }
        let out: Vec<F> = toks
            .map(|tok| tok.parse::<F>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.format(format!("unparsable value on line {lineno}")))?;
        if out.len() != n {
            return Err(self.format(format!("line {lineno}: `{key}` expects {n} values")));
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<()> {
        if self.lines[self.next..].iter().any(|l| !l.trim().is_empty()) {
            return Err(self.format("trailing data"));
        }
        Ok(())
    }
}

pub const FIELD_TAG: &str = "HJBPOD-FIELD";

pub fn field_writer<T: Real>(grid: &CavityGrid, state: &StaggeredState<T>) -> TextWriter {
    let mut w = TextWriter::new(
        FIELD_TAG,
        &[
            grid.nx().to_string(),
            grid.ny().to_string(),
            format!("{:e}", state.time),
        ],
    );
    w.values(state.u_faces(grid))
        .values(state.v_faces(grid))
        .values(&state.pressure);
    w
}

pub fn save_field<T: Real>(path: &Path, grid: &CavityGrid, state: &StaggeredState<T>) -> Result<()> {
    field_writer(grid, state).save(path)
}

pub fn load_field<T: Real>(path: &Path) -> Result<(CavityGrid, StaggeredState<T>)> {
    let mut r = TextReader::open(path, FIELD_TAG)?;
    let grid = CavityGrid::new(r.header_field(0, "nx")?, r.header_field(1, "ny")?)?;
    let time: T = r.header_field(2, "t")?;
    let mut velocity: Vec<T> = r.values(grid.n_u())?;
    velocity.extend(r.values::<T>(grid.n_v())?);
    let pressure = r.values(grid.n_cells())?;
    r.finish()?;
    Ok((
        grid,
        StaggeredState {
            velocity,
            pressure,
            time,
        },
    ))
}
