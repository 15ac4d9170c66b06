//! `CHAN v1` text format.
//!
//! ```text
//! # optional comment lines
//! CHAN v1 <rows> <cols>
//! <re>,<im>        (rows × cols lines, row-major)
//! ```
//!
//! Values are written with 17 significant digits so that a read/write cycle
//! reproduces every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const MAGIC: &str = "CHAN";
const VERSION: &str = "v1";

pub fn format_channel(h: &ChannelMatrix) -> String {
    let taps = h.taps();
    let mut out = String::with_capacity(48 * taps.len() + 32);
    writeln!(out, "{MAGIC} {VERSION} {} {}", taps.nrows(), taps.ncols()).unwrap();
    for r in 0..taps.nrows() {
        for c in 0..taps.ncols() {
            let z = taps[(r, c)];
            writeln!(out, "{:.16e},{:.16e}", z.re, z.im).unwrap();
        }
    }
    out
}

pub fn parse_channel(text: &str, origin: &Path) -> Result<ChannelMatrix> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| err(0, "missing CHAN header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(err(hline, format!("expected `{MAGIC} {VERSION} <rows> <cols>`, got `{header}`")));
    }
    let dim = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| err(hline, format!("invalid dimension `{s}`")))
    };
    let (rows, cols) = (dim(fields[2])?, dim(fields[3])?);

    let mut taps = CMatrix::zeros(rows, cols);
    let mut count = 0usize;
    for (ln, line) in lines {
        if count == rows * cols {
            return Err(Error::Dimension(format!(
                "{}: header declares {rows}x{cols} entries but line {ln} has more data",
                origin.display()
            )));
        }
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| err(ln, format!("expected `re,im`, got `{line}`")))?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| err(ln, format!("bad number `{s}`: {e}")))
        };
        let z = Complex64::new(parse(re)?, parse(im)?);
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite(format!("{} line {ln}", origin.display())));
        }
        taps[(count / cols, count % cols)] = z;
        count += 1;
    }
    if count != rows * cols {
        return Err(Error::Dimension(format!(
            "{}: header declares {rows}x{cols} = {} entries, found {count}",
            origin.display(),
            rows * cols
        )));
    }
    ChannelMatrix::new(taps)
}

pub fn read_channel_file(path: impl AsRef<Path>) -> Result<ChannelMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_channel(&text, path)
}

pub fn write_channel_file(h: &ChannelMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_channel(h))?;
    Ok(())
}
