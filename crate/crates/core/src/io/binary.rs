//! Little-endian record primitives shared by the binary formats.

use ndarray::Array2;

use crate::error::FormatError;

pub const VERSION: u64 = 1;

#[derive(Debug, Default)]
pub struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn with_magic(magic: &[u8; 4]) -> Self {
        let mut w = Writer {
            buf: magic.to_vec(),
        };
        w.u64(VERSION);
        w
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }

    pub fn indices(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.u64(x as u64);
        }
    }

    pub fn edges(&mut self, v: &[[usize; 2]]) {
        self.indices(v.as_flattened());
    }

    pub fn matrix(&mut self, m: &Array2<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for x in m.iter() {
            self.f64(*x);
        }
    }
}

pub struct Reader<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, at: 0 }
    }

    /// Checks the magic and version header.
    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        let found = self.bytes(4)?;
        if found != magic {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        match self.u64()? {
            VERSION => Ok(()),
            v => Err(FormatError::Version(v)),
        }
    }

    pub fn at_end(&self) -> bool {
        self.at == self.data.len()
    }

    pub fn position(&self) -> usize {
        self.at
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.data.len() - self.at < n {
            return Err(FormatError::Malformed(format!(
                "need {n} bytes at offset {}, only {} left",
                self.at,
                self.data.len() - self.at
            )));
        }
        let out = &self.data[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(
            self.bytes(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(
            self.bytes(8)?.try_into().expect("8 bytes"),
        ))
    }

    /// A length that must fit in the remaining input at `unit` bytes each.
    fn len(&mut self, unit: usize) -> Result<usize, FormatError> {
        let n = self.u64()? as usize;
        if n.checked_mul(unit)
            .is_none_or(|b| b > self.data.len() - self.at)
        {
            return Err(FormatError::Malformed(format!(
                "length {n} exceeds remaining input"
            )));
        }
        Ok(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, FormatError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn indices(&mut self) -> Result<Vec<usize>, FormatError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64().map(|v| v as usize)).collect()
    }

    pub fn matrix(&mut self) -> Result<Array2<f64>, FormatError> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| {
                n.checked_mul(8)
                    .is_some_and(|b| b <= self.data.len() - self.at)
            })
            .ok_or_else(|| {
                FormatError::Malformed(format!("matrix {rows}x{cols} exceeds remaining input"))
            })?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        Ok(Array2::from_shape_vec((rows, cols), data).expect("size checked"))
    }
}

pub fn points_to_flat(p: &[[f64; 3]]) -> Vec<f64> {
    p.iter().flatten().copied().collect()
}

pub fn flat_to_points(v: &[f64]) -> Result<Vec<[f64; 3]>, FormatError> {
    if !v.len().is_multiple_of(3) {
        return Err(FormatError::Malformed(format!(
            "{} values are not xyz triples",
            v.len()
        )));
    }
    Ok(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

pub fn pairs(v: &[usize]) -> Result<Vec<[usize; 2]>, FormatError> {
    if !v.len().is_multiple_of(2) {
        return Err(FormatError::Malformed("odd edge index count".into()));
    }
    Ok(v.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}
