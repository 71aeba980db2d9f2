//! Packed Boolean columns with a per-cell validity mask.
//!
//! Gate search spends nearly all of its time counting joint occurrences of
//! Boolean columns, so columns are stored as 64-bit words and counted with
//! `popcount`. Two invariants hold for every [`BitColumn`]:
//!
//! * bits past `len` are zero in both `values` and `valid`;
//! * `values & !valid == 0`, i.e. a missing cell never reads as 1.

const WORD: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitColumn {
    len: usize,
    values: Vec<u64>,
    valid: Vec<u64>,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

impl BitColumn {
    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_options(bits.iter().map(|&b| Some(b)), bits.len())
    }

    pub fn from_options<I>(cells: I, len: usize) -> Self
    where
        I: IntoIterator<Item = Option<bool>>,
    {
        let mut values = vec![0u64; words_for(len)];
        let mut valid = vec![0u64; words_for(len)];
        let mut n = 0;
        for (i, cell) in cells.into_iter().enumerate() {
            assert!(i < len, "more cells than declared length");
            let mask = 1u64 << (i % WORD);
            if let Some(b) = cell {
                valid[i / WORD] |= mask;
                if b {
                    values[i / WORD] |= mask;
                }
            }
            n += 1;
        }
        assert_eq!(n, len, "fewer cells than declared length");
        BitColumn { len, values, valid }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        assert!(i < self.len, "index {i} out of bounds for length {}", self.len);
        let mask = 1u64 << (i % WORD);
        if self.valid[i / WORD] & mask == 0 {
            None
        } else {
            Some(self.values[i / WORD] & mask != 0)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<bool>> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    /// Number of non-missing cells.
    pub fn count_valid(&self) -> usize {
        self.valid.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of cells that are present and true.
    pub fn count_ones(&self) -> usize {
        self.values.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn values_words(&self) -> &[u64] {
        &self.values
    }

    pub fn valid_words(&self) -> &[u64] {
        &self.valid
    }

    /// Builds a column from raw words, masking away tail bits and any value
    /// bit that is not also valid.
    pub fn from_words(len: usize, mut values: Vec<u64>, mut valid: Vec<u64>) -> Self {
        assert_eq!(values.len(), words_for(len));
        assert_eq!(valid.len(), words_for(len));
        if !len.is_multiple_of(WORD) {
            let tail = (1u64 << (len % WORD)) - 1;
            if let Some(w) = valid.last_mut() {
                *w &= tail;
            }
        }
        for (v, m) in values.iter_mut().zip(&valid) {
            *v &= m;
        }
        BitColumn { len, values, valid }
    }

    /// Cellwise negation; missing cells stay missing.
    pub fn not(&self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(v, m)| !v & m)
            .collect();
        BitColumn {
            len: self.len,
            values,
            valid: self.valid.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_missing() {
        let cells = vec![Some(true), None, Some(false), Some(true)];
        let col = BitColumn::from_options(cells.clone(), 4);
        assert_eq!(col.iter().collect::<Vec<_>>(), cells);
        assert_eq!(col.count_valid(), 3);
        assert_eq!(col.count_ones(), 2);
    }

    #[test]
    fn tail_bits_stay_clear() {
        let col = BitColumn::from_words(3, vec![u64::MAX], vec![u64::MAX]);
        assert_eq!(col.count_valid(), 3);
        assert_eq!(col.count_ones(), 3);
        assert_eq!(col.not().count_ones(), 0);
    }

    #[test]
    fn spans_word_boundary() {
        let bits: Vec<bool> = (0..130).map(|i| i % 3 == 0).collect();
        let col = BitColumn::from_bools(&bits);
        assert_eq!(col.count_ones(), bits.iter().filter(|b| **b).count());
        assert_eq!(col.get(129), Some(bits[129]));
        assert_eq!(col.not().count_ones(), 130 - col.count_ones());
    }
}
