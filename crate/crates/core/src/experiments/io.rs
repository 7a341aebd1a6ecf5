//! Plain-text tensor dumps.
//!
//! The first line is `shape,N1,...,ND`; every following line holds one
//! value, in vectorization order (last index fastest). Values are printed in
//! shortest round-trip form, so reading a dump back is exact.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, TensorShape};

pub fn write_tensor<W: Write>(t: &DenseTensor, mut w: W) -> std::io::Result<()> {
    let dims: Vec<String> = t.shape().dims().iter().map(|d| d.to_string()).collect();
    writeln!(w, "shape,{}", dims.join(","))?;
    for v in t.vectorize() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: R) -> Result<DenseTensor> {
    let bad = |message: String| Error::Parse {
        path: "<tensor>".into(),
        message,
    };
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty tensor file".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let mut fields = header.trim().split(',');
    if fields.next() != Some("shape") {
        return Err(bad(format!("expected a 'shape,...' header, got '{header}'")));
    }
    let dims = fields
        .map(|f| f.trim().parse::<usize>().map_err(|e| bad(format!("bad extent '{f}': {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let shape = TensorShape::new(&dims)?;
    let mut values = Vec::with_capacity(shape.len());
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .parse::<f64>()
            .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
        values.push(v);
    }
    if values.len() != shape.len() {
        return Err(bad(format!(
            "shape {shape} needs {} values, found {}",
            shape.len(),
            values.len()
        )));
    }
    DenseTensor::from_vec(shape, values)
}

pub fn save_tensor(t: &DenseTensor, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_tensor(t, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: &Path) -> Result<DenseTensor> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(file).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let shape = TensorShape::new(&[2, 3, 2]).unwrap();
        let t = DenseTensor::from_fn(shape, |i| (i[0] as f64 + 0.1) / 3.0 - i[1] as f64 * 1e-17 + i[2] as f64);
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("shape,2,3,2\n"));
        let back = read_tensor(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_tensor("".as_bytes()).is_err());
        assert!(read_tensor("dims,2\n1\n2\n".as_bytes()).is_err());
        assert!(read_tensor("shape,2\n1\n".as_bytes()).is_err());
        assert!(read_tensor("shape,2\n1\nx\n".as_bytes()).is_err());
    }
}
