use crate::error::{Error, Result};
use crate::qubo::BitCode;

/// `N` codes of `n_q` bits, each row packed least-significant-bit first and
/// padded to a whole byte.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeMatrix {
    n: usize,
    n_q: usize,
    bytes: Vec<u8>,
}

pub fn row_bytes(n_q: usize) -> usize {
    n_q.div_ceil(8)
}

pub fn pack(code: &BitCode, out: &mut [u8]) {
    out.fill(0);
    for j in code.ones() {
        out[j / 8] |= 1 << (j % 8);
    }
}

pub fn unpack(bytes: &[u8], n_q: usize) -> BitCode {
    (0..n_q).map(|j| bytes[j / 8] >> (j % 8) & 1 == 1).collect()
}

impl CodeMatrix {
    pub fn zeros(n: usize, n_q: usize) -> Self {
        CodeMatrix {
            n,
            n_q,
            bytes: vec![0; n * row_bytes(n_q)],
        }
    }

    pub fn from_codes(n_q: usize, codes: &[BitCode]) -> Result<Self> {
        let mut m = Self::zeros(codes.len(), n_q);
        for (k, c) in codes.iter().enumerate() {
            m.set_row(k, c)?;
        }
        Ok(m)
    }

    /// Wrap packed bytes; padding bits beyond `n_q` must be zero.
    pub fn from_bytes(n: usize, n_q: usize, bytes: Vec<u8>) -> Result<Self> {
        let stride = row_bytes(n_q);
        Error::check_len("packed code bytes", n * stride, bytes.len())?;
        if !n_q.is_multiple_of(8) {
            let mask = !((1u8 << (n_q % 8)) - 1);
            if bytes.chunks(stride).any(|row| row[stride - 1] & mask != 0) {
                return Err(Error::invalid("nonzero padding bits in code matrix"));
            }
        }
        Ok(CodeMatrix { n, n_q, bytes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn row_bytes(&self, k: usize) -> &[u8] {
        let s = row_bytes(self.n_q);
        &self.bytes[k * s..(k + 1) * s]
    }

    pub fn row(&self, k: usize) -> BitCode {
        unpack(self.row_bytes(k), self.n_q)
    }

    pub fn rows(&self) -> impl Iterator<Item = BitCode> + '_ {
        (0..self.n).map(|k| self.row(k))
    }

    pub fn set_row(&mut self, k: usize, code: &BitCode) -> Result<()> {
        Error::check_len("code length", self.n_q, code.len())?;
        let s = row_bytes(self.n_q);
        pack(code, &mut self.bytes[k * s..(k + 1) * s]);
        Ok(())
    }

    pub fn get(&self, k: usize, j: usize) -> bool {
        self.row_bytes(k)[j / 8] >> (j % 8) & 1 == 1
    }

    /// `Σ_k a_j^(k)` for every bit `j`.
    pub fn column_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_q];
        for k in 0..self.n {
            let row = self.row_bytes(k);
            for (j, c) in counts.iter_mut().enumerate() {
                *c += u64::from(row[j / 8] >> (j % 8) & 1);
            }
        }
        counts
    }

    /// `Σ_k a_l^(k) a_m^(k)` as a dense symmetric `n_q × n_q` table whose
    /// diagonal equals the column counts.
    pub fn pair_counts(&self) -> Vec<u64> {
        let q = self.n_q;
        let mut counts = vec![0u64; q * q];
        let mut ones = Vec::with_capacity(q);
        for k in 0..self.n {
            let row = self.row_bytes(k);
            ones.clear();
            ones.extend((0..q).filter(|&j| row[j / 8] >> (j % 8) & 1 == 1));
            for (x, &l) in ones.iter().enumerate() {
                for &m in &ones[x..] {
                    counts[l * q + m] += 1;
                }
            }
        }
        for l in 0..q {
            for m in 0..l {
                counts[l * q + m] = counts[m * q + l];
            }
        }
        counts
    }

    /// Concatenate per-stage code blocks column-wise.
    pub fn hstack(blocks: &[&CodeMatrix]) -> Result<CodeMatrix> {
        let n = blocks.first().map_or(0, |b| b.n);
        for b in blocks {
            Error::check_len("stage code rows", n, b.n)?;
        }
        let total: usize = blocks.iter().map(|b| b.n_q).sum();
        let mut out = CodeMatrix::zeros(n, total);
        for k in 0..n {
            let parts: Vec<BitCode> = blocks.iter().map(|b| b.row(k)).collect();
            out.set_row(k, &BitCode::concat(&parts))?;
        }
        Ok(out)
    }

    /// Split into consecutive column blocks of the given widths.
    pub fn split(&self, widths: &[usize]) -> Result<Vec<CodeMatrix>> {
        Error::check_len("stage widths", self.n_q, widths.iter().sum())?;
        let mut out: Vec<CodeMatrix> = widths.iter().map(|&w| CodeMatrix::zeros(self.n, w)).collect();
        for k in 0..self.n {
            let row = self.row(k);
            let mut start = 0;
            for (m, &w) in out.iter_mut().zip(widths) {
                let part: BitCode = row.bits()[start..start + w].iter().copied().collect();
                m.set_row(k, &part)?;
                start += w;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_is_lsb_first() {
        let code = BitCode::from(vec![true, false, false, false, false, false, false, false, true]);
        let m = CodeMatrix::from_codes(9, std::slice::from_ref(&code)).unwrap();
        assert_eq!(m.as_bytes(), &[0b0000_0001, 0b0000_0001]);
        assert_eq!(m.row(0), code);
    }

    #[test]
    fn counts() {
        let codes = [
            BitCode::from(vec![true, true, false]),
            BitCode::from(vec![true, false, true]),
            BitCode::from(vec![true, true, true]),
        ];
        let m = CodeMatrix::from_codes(3, &codes).unwrap();
        assert_eq!(m.column_counts(), vec![3, 2, 2]);
        let p = m.pair_counts();
        assert_eq!(p[1], 2); // (0,1)
        assert_eq!(p[2], 2); // (0,2)
        assert_eq!(p[5], 1); // (1,2)
        assert_eq!(p[7], 1); // (2,1)
        assert_eq!(p[4], 2); // (1,1)
    }

    #[test]
    fn hstack_then_split() {
        let a = CodeMatrix::from_codes(3, &[BitCode::from_index(5, 3), BitCode::from_index(2, 3)]).unwrap();
        let b = CodeMatrix::from_codes(7, &[BitCode::from_index(99, 7), BitCode::from_index(1, 7)]).unwrap();
        let s = CodeMatrix::hstack(&[&a, &b]).unwrap();
        assert_eq!(s.n_q(), 10);
        assert_eq!(s.row(0), BitCode::from_index(5 | (99 << 3), 10));
        let parts = s.split(&[3, 7]).unwrap();
        assert_eq!(parts, vec![a, b]);
    }

    #[test]
    fn padding_must_be_zero() {
        assert!(CodeMatrix::from_bytes(1, 3, vec![0b1000]).is_err());
        assert!(CodeMatrix::from_bytes(1, 3, vec![0b0101]).is_ok());
        assert!(CodeMatrix::from_bytes(2, 3, vec![0]).is_err());
    }
}
