//! Increment history `u^k - u^{k-1}` for the discrete Caputo sum.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::time_mesh::KernelRow;

/// All increments `phi^k - phi^{k-1}`, `k = 1..=n`, in order.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    nx: usize,
    ny: usize,
    increments: Vec<Field>,
    compensated: bool,
}

impl HistoryBuffer {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            increments: Vec::new(),
            compensated: false,
        }
    }

    /// Switches the weighted sums to Kahan-compensated accumulation.
    pub fn with_compensated_sum(mut self, on: bool) -> Self {
        self.compensated = on;
        self
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn push(&mut self, increment: Field) -> Result<()> {
        if increment.nx() != self.nx || increment.ny() != self.ny {
            return Err(Error::ShapeMismatch {
                expected: (self.nx, self.ny),
                found_len: increment.len(),
            });
        }
        self.increments.push(increment);
        Ok(())
    }

    /// Increment `k` (1-based).
    pub fn get(&self, k: usize) -> Option<&Field> {
        k.checked_sub(1).and_then(|i| self.increments.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Field> {
        self.increments.iter()
    }

    /// Number of scalars held.
    pub fn stored_scalars(&self) -> usize {
        self.increments.len() * self.nx * self.ny
    }

    /// `sum_{k <= count} w_k * increment_k`, ascending `k`.
    fn weighted_sum(&self, row: &KernelRow, count: usize) -> Field {
        let mut acc = Field::zeros(self.nx, self.ny);
        if self.compensated {
            let mut carry = vec![0.0; self.nx * self.ny];
            for (k, inc) in self.increments[..count].iter().enumerate() {
                let w = row.weight(k + 1);
                for ((s, c), v) in acc.values_mut().iter_mut().zip(&mut carry).zip(inc.values()) {
                    let y = w * v - *c;
                    let t = *s + y;
                    *c = (t - *s) - y;
                    *s = t;
                }
            }
        } else {
            for (k, inc) in self.increments[..count].iter().enumerate() {
                let w = row.weight(k + 1);
                for (s, v) in acc.values_mut().iter_mut().zip(inc.values()) {
                    *s += w * v;
                }
            }
        }
        acc
    }

    /// Explicit part of the Caputo sum for step `n + 1`:
    /// `sum_{k=1..n} b_{n+1-k}^{(n+1)} (phi^k - phi^{k-1})`.
    ///
    /// `row` must belong to step `len() + 1`.
    pub fn history_term(&self, row: &KernelRow) -> Result<Field> {
        if row.len() != self.len() + 1 {
            return Err(Error::HistoryLength {
                row_len: row.len(),
                history_len: self.len(),
            });
        }
        Ok(self.weighted_sum(row, self.len()))
    }

    /// Full Caputo sum `sum_{k=1..n} b_{n-k}^{(n)} (phi^k - phi^{k-1})` for
    /// the step whose increment was pushed last.
    pub fn caputo_sum(&self, row: &KernelRow) -> Result<Field> {
        if row.len() != self.len() {
            return Err(Error::HistoryLength {
                row_len: row.len(),
                history_len: self.len(),
            });
        }
        Ok(self.weighted_sum(row, self.len()))
    }

    /// Writes `FPHH <nx> <ny> <count>\n` followed by raw little-endian f64
    /// increments.
    pub fn write_checkpoint(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "FPHH {} {} {}", self.nx, self.ny, self.len())?;
        for inc in &self.increments {
            for v in inc.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint(mut r: impl BufRead) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "FPHH" {
            return Err(Error::Format(format!("bad history header {header:?}")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad integer {s:?} in history header")))
        };
        let (nx, ny, count) = (parse(parts[1])?, parse(parts[2])?, parse(parts[3])?);
        let mut buf = Self::new(nx, ny);
        let mut bytes = [0u8; 8];
        for _ in 0..count {
            let mut values = Vec::with_capacity(nx * ny);
            for _ in 0..nx * ny {
                r.read_exact(&mut bytes)?;
                values.push(f64::from_le_bytes(bytes));
            }
            buf.push(Field::from_values(nx, ny, values)?)?;
        }
        Ok(buf)
    }
}
