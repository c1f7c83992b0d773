//! Plain-text weight snapshots.
//!
//! Layout (whitespace separated, one record per line):
//!
//! ```text
//! cpi-mlp 1
//! seed <u64>
//! layers <count>
//! dense <fan_in> <fan_out>
//! <fan_out weights of input row 0>
//! ...
//! <fan_out weights of input row fan_in-1>
//! <fan_out biases>
//! dense ...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a
//! write/read cycle reproduces every weight bit for bit.

use std::io::{BufRead, Write};

use super::matrix::Matrix;
use super::mlp::{Dense, Mlp};
use crate::error::{Error, Result};

const MAGIC: &str = "cpi-mlp";
const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(net: &Mlp, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "seed {}", net.config().seed)?;
    writeln!(w, "layers {}", net.layers().len())?;
    for layer in net.layers() {
        writeln!(w, "dense {} {}", layer.fan_in(), layer.fan_out())?;
        for r in 0..layer.fan_in() {
            write_row(&mut w, layer.weights.row(r))?;
        }
        write_row(&mut w, &layer.bias)?;
    }
    Ok(())
}

fn write_row<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let line: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    writeln!(w, "{}", line.join(" "))?;
    Ok(())
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<Mlp> {
    let mut lines = r.lines();
    let mut next = move || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Snapshot("unexpected end of file".into()))?
            .map_err(Error::from)
    };
    let header = next()?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Snapshot(format!("bad magic line {header:?}")));
    }
    let version: u32 = parse_token(parts.next(), "version")?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let seed: u64 = parse_keyed(&next()?, "seed")?;
    let count: usize = parse_keyed(&next()?, "layers")?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let head = next()?;
        let mut p = head.split_whitespace();
        if p.next() != Some("dense") {
            return Err(Error::Snapshot(format!("expected dense record, got {head:?}")));
        }
        let fan_in: usize = parse_token(p.next(), "fan_in")?;
        let fan_out: usize = parse_token(p.next(), "fan_out")?;
        let mut w = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in {
            w.extend(parse_row(&next()?, fan_out)?);
        }
        let bias = parse_row(&next()?, fan_out)?;
        layers.push(Dense {
            weights: Matrix::from_vec(fan_in, fan_out, w)?,
            bias,
        });
    }
    Mlp::from_layers(layers, seed)
}

fn parse_token<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Snapshot(format!("missing or invalid {what}")))
}

fn parse_keyed<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    let mut p = line.split_whitespace();
    if p.next() != Some(key) {
        return Err(Error::Snapshot(format!("expected {key:?} record, got {line:?}")));
    }
    parse_token(p.next(), key)
}

fn parse_row(line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Snapshot(format!("bad value {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expected {
        return Err(Error::Snapshot(format!(
            "row has {} values, expected {expected}",
            vals.len()
        )));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_nn::MlpConfig;

    #[test]
    fn rejects_truncated_and_corrupt_files() {
        let net = Mlp::new(MlpConfig::new(2, vec![3], 1, 7)).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(read_snapshot(truncated.as_bytes()).is_err());
        let corrupt = text.replacen("cpi-mlp 1", "cpi-mlp 9", 1);
        assert!(read_snapshot(corrupt.as_bytes()).is_err());
        assert!(read_snapshot("hello".as_bytes()).is_err());
    }
}
