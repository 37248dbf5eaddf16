//! Plain-text matrix persistence shared by all modules: a `rows cols`
//! header line, then row-major whitespace-separated values with 17
//! significant digits (round-trip exact for f64).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn save_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{} {}", m.nrows(), m.ncols())?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if j > 0 {
                    write!(w, " ")?;
                }
                write!(w, "{:.16e}", m[(i, j)])?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason,
    };

    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err("empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let mut dims = header.split_whitespace();
    let rows: usize = dims
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(format!("bad header `{header}`")))?;
    let cols: usize = dims
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(format!("bad header `{header}`")))?;

    let mut values = Vec::with_capacity(rows * cols);
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(format!("bad value `{tok}`")))?;
            values.push(v);
        }
    }
    if values.len() != rows * cols {
        return Err(parse_err(format!(
            "expected {} values, found {}",
            rows * cols,
            values.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// One value per line, used for cost traces.
pub fn save_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for v in trace {
        writeln!(w, "{v:.16e}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
