//! word2vec text format: a `"<vocab> <dim>"` header line, then one line per
//! token with the token followed by `dim` reals. Values are printed with 9
//! significant digits, which round-trips exactly on a second save.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{VecError, VectorSpace};

pub fn save_vectors(space: &VectorSpace, path: &Path) -> Result<(), VecError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vectors(space, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_vectors(space: &VectorSpace, w: &mut impl Write) -> Result<(), VecError> {
    writeln!(w, "{} {}", space.vocab_size(), space.dimension())?;
    for token in space.tokens() {
        write!(w, "{token}")?;
        for v in space.vector(token).expect("token iterated from space") {
            write!(w, " {}", format_value(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn load_vectors(path: &Path) -> Result<VectorSpace, VecError> {
    read_vectors(BufReader::new(File::open(path)?))
}

pub fn read_vectors(reader: impl Read) -> Result<VectorSpace, VecError> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or(VecError::MalformedLine { line: 1, reason: "missing header".into() })??;
    let mut parts = header.split_whitespace();
    let vocab: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(VecError::MalformedLine { line: 1, reason: "header must be `<vocab> <dim>`".into() })?;
    let dimension: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(VecError::MalformedLine { line: 1, reason: "header must be `<vocab> <dim>`".into() })?;
    if parts.next().is_some() {
        return Err(VecError::MalformedLine { line: 1, reason: "header has extra fields".into() });
    }
    if dimension == 0 {
        return Err(VecError::MalformedLine { line: 1, reason: "dimension must be >= 1".into() });
    }

    let mut builder = VectorSpace::builder(dimension);
    let mut count = 0usize;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().ok_or(VecError::MalformedLine {
            line: line_no,
            reason: "missing token".into(),
        })?;
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| VecError::MalformedLine {
                    line: line_no,
                    reason: format!("`{f}` is not a number"),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != dimension {
            return Err(VecError::MalformedLine {
                line: line_no,
                reason: format!("expected {dimension} values, found {}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VecError::MalformedLine {
                line: line_no,
                reason: "non-finite value".into(),
            });
        }
        builder.insert(token, values).map_err(|e| match e {
            VecError::DuplicateToken { token } => VecError::DuplicateToken { token },
            other => other,
        })?;
        count += 1;
    }
    if count != vocab {
        return Err(VecError::MalformedLine {
            line: 1,
            reason: format!("header declares {vocab} tokens, file has {count}"),
        });
    }
    Ok(builder.build())
}

fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}
