//! K×M blocks of waveform samples and their on-disk formats.
//!
//! Binary layout (little-endian): magic `SSE1`, `u32` K, `u32` M, then K·M
//! `f64` values in row-major order (gate-major: row k holds gate k of every
//! signal).

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::signal_model::Waveform;

pub const BLOCK_MAGIC: &[u8; 4] = b"SSE1";

/// Gates along rows, successive signals along columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    gates: usize,
    signals: usize,
    data: Vec<f64>,
}

impl SignalBlock {
    pub fn zeros(gates: usize, signals: usize) -> Self {
        Self {
            gates,
            signals,
            data: vec![0.0; gates * signals],
        }
    }

    pub fn from_row_major(gates: usize, signals: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != gates * signals {
            return Err(Error::ShapeMismatch {
                expected: format!("{gates}x{signals} = {} values", gates * signals),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { gates, signals, data })
    }

    /// Builds a block whose columns are the given waveforms.
    pub fn from_columns(columns: &[Waveform]) -> Result<Self> {
        let signals = columns.len();
        let gates = columns.first().map_or(0, Waveform::len);
        let mut block = Self::zeros(gates, signals);
        for (m, col) in columns.iter().enumerate() {
            if col.len() != gates {
                return Err(Error::ShapeMismatch {
                    expected: format!("{gates} gates"),
                    got: format!("{} gates in column {m}", col.len()),
                });
            }
            block.set_column(m, col.samples());
        }
        Ok(block)
    }

    pub fn gates(&self) -> usize {
        self.gates
    }

    pub fn signals(&self) -> usize {
        self.signals
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.gates, self.signals)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, gate: usize, signal: usize) -> f64 {
        self.data[gate * self.signals + signal]
    }

    #[inline]
    pub fn set(&mut self, gate: usize, signal: usize, value: f64) {
        self.data[gate * self.signals + signal] = value;
    }

    /// Evolution of one gate across all signals.
    pub fn row(&self, gate: usize) -> &[f64] {
        &self.data[gate * self.signals..(gate + 1) * self.signals]
    }

    pub fn row_mut(&mut self, gate: usize) -> &mut [f64] {
        &mut self.data[gate * self.signals..(gate + 1) * self.signals]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.signals.max(1)).take(self.gates)
    }

    pub fn column(&self, signal: usize) -> Waveform {
        Waveform((0..self.gates).map(|k| self.get(k, signal)).collect())
    }

    pub fn set_column(&mut self, signal: usize, values: &[f64]) {
        for (k, v) in values.iter().enumerate() {
            self.set(k, signal, *v);
        }
    }

    /// Columns `start..end` as a new block.
    pub fn columns(&self, start: usize, end: usize) -> SignalBlock {
        let width = end - start;
        let mut out = Self::zeros(self.gates, width);
        for k in 0..self.gates {
            out.row_mut(k).copy_from_slice(&self.row(k)[start..end]);
        }
        out
    }

    /// Concatenates blocks side by side.
    pub fn hconcat(parts: &[SignalBlock]) -> Result<SignalBlock> {
        let gates = parts.first().map_or(0, |b| b.gates);
        let signals = parts.iter().map(|b| b.signals).sum();
        let mut out = Self::zeros(gates, signals);
        let mut offset = 0;
        for part in parts {
            if part.gates != gates {
                return Err(Error::ShapeMismatch {
                    expected: format!("{gates} gates"),
                    got: format!("{} gates", part.gates),
                });
            }
            for k in 0..gates {
                out.row_mut(k)[offset..offset + part.signals].copy_from_slice(part.row(k));
            }
            offset += part.signals;
        }
        Ok(out)
    }

    /// Average waveform over all signals.
    pub fn mean_column(&self) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().sum::<f64>() / self.signals as f64)
            .collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_shape(&self, other: &SignalBlock) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.gates, self.signals),
                got: format!("{}x{}", other.gates, other.signals),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.data.len());
        out.extend_from_slice(BLOCK_MAGIC);
        out.extend_from_slice(&(self.gates as u32).to_le_bytes());
        out.extend_from_slice(&(self.signals as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 12 || &bytes[..4] != BLOCK_MAGIC {
            return Err("missing SSE1 header".into());
        }
        let gates = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let signals = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = 12 + 8 * gates * signals;
        if bytes.len() != expected {
            return Err(format!(
                "header announces {gates}x{signals} but payload holds {} bytes",
                bytes.len() - 12
            ));
        }
        let data = bytes[12..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { gates, signals, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| w.write_all(&self.to_bytes()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|reason| Error::format(path, reason))
    }

    /// Inspection export: one line per gate, one column per signal.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            let header: Vec<String> = (0..self.signals).map(|m| format!("s{m}")).collect();
            writeln!(w, "gate,{}", header.join(","))?;
            for (k, row) in self.rows().enumerate() {
                let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                writeln!(w, "{k},{}", vals.join(","))?;
            }
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_truncated_payload() {
        let b = SignalBlock::from_row_major(2, 3, vec![1.0; 6]).unwrap();
        let mut bytes = b.to_bytes();
        bytes.pop();
        assert!(SignalBlock::from_bytes(&bytes).is_err());
        assert!(SignalBlock::from_bytes(b"SSE2\0\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn header_layout() {
        let b = SignalBlock::from_row_major(104, 2, vec![0.5; 208]).unwrap();
        let bytes = b.to_bytes();
        assert_eq!(&bytes[..4], b"SSE1");
        assert_eq!(&bytes[4..8], &104u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), 12 + 208 * 8);
    }

    #[test]
    fn column_slicing_and_concat() {
        let data: Vec<f64> = (0..12).map(f64::from).collect();
        let b = SignalBlock::from_row_major(3, 4, data).unwrap();
        let left = b.columns(0, 3);
        let right = b.columns(3, 4);
        assert_eq!(right.row(2), &[11.0]);
        assert_eq!(SignalBlock::hconcat(&[left, right]).unwrap(), b);
        assert_eq!(b.column(1).samples(), &[1.0, 5.0, 9.0]);
    }

    proptest! {
        #[test]
        fn byte_roundtrip(gates in 1usize..6, signals in 1usize..6, seed in any::<u64>()) {
            let data: Vec<f64> = (0..gates * signals)
                .map(|i| f64::from_bits(seed.wrapping_mul(i as u64 + 1) >> 2))
                .collect();
            let b = SignalBlock::from_row_major(gates, signals, data).unwrap();
            let back = SignalBlock::from_bytes(&b.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), b.to_bytes());
        }
    }
}
