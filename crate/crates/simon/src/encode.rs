//! Character alphabet and one-hot column encoding.
//!
//! A column of text cells becomes a [max_cells, max_len, 71] one-hot
//! tensor: cells are resampled to exactly `max_cells` rows, lowercased,
//! truncated to `max_len` characters, and each character maps to one of
//! 71 alphabet positions. Characters outside the alphabet (and padding
//! past the end of a cell) encode as all-zero rows.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Result, SimonError};
use crate::tensor::{Scalar, Tensor};

/// Number of characters in the encoding alphabet.
pub const ALPHABET_SIZE: usize = 71;

const LETTERS: &str = "abcdefghijklmnopqrstuvwxyz";
const DIGITS: &str = "0123456789";
// 35 specials: newline, 32 visible punctuation marks, space, tab.
const SPECIALS: &[char] = &[
    '\n', '-', ',', ';', '.', '!', '?', ':', '\'', '"', '/', '\\', '|', '_', '@', '#', '$', '%',
    '^', '&', '*', '~', '`', '+', '=', '<', '>', '(', ')', '[', ']', '{', '}', ' ', '\t',
];

/// Ordered 71-character dictionary with a reverse index.
///
/// The member list is fixed configuration, not derived from data, and is
/// serialized inside model files so a saved model never depends on this
/// source constant staying put.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Alphabet {
    fn from_chars(chars: Vec<char>) -> Result<Self> {
        let mut index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(SimonError::Config(format!("duplicate alphabet character {c:?}")));
            }
        }
        if chars.len() != ALPHABET_SIZE {
            return Err(SimonError::Config(format!(
                "alphabet has {} characters, expected {ALPHABET_SIZE}",
                chars.len()
            )));
        }
        Ok(Alphabet { chars, index })
    }

    /// Rebuild an alphabet from its serialized character string.
    pub fn from_string(s: &str) -> Result<Self> {
        Self::from_chars(s.chars().collect())
    }

    /// The members in order, as a single string (for serialization).
    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }

    pub fn size(&self) -> usize {
        self.chars.len()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn char_at(&self, index: usize) -> char {
        self.chars[index]
    }
}

/// The fixed 71-character alphabet: a-z, 0-9, newline, 32 punctuation
/// marks, space, and tab, in that order.
pub fn build_alphabet() -> Alphabet {
    let mut chars: Vec<char> = LETTERS.chars().collect();
    chars.extend(DIGITS.chars());
    chars.extend_from_slice(SPECIALS);
    Alphabet::from_chars(chars).expect("built-in alphabet is valid")
}

/// An ordered list of text cells: the unit of classification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub cells: Vec<String>,
    pub source_name: String,
    /// Dataset or file the column came from, when known.
    pub provenance: Option<String>,
}

impl Column {
    pub fn new(source_name: impl Into<String>, cells: Vec<String>) -> Self {
        Column { cells: cells.into_iter().collect(), source_name: source_name.into(), provenance: None }
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// One-hot encode a single cell to a [max_len, 71] matrix.
///
/// The text is lowercased, then its first `max_len` characters are
/// encoded one per row; unknown characters give all-zero rows, and cells
/// shorter than `max_len` are padded with all-zero rows.
pub fn encode_cell<S: Scalar>(text: &str, alphabet: &Alphabet, max_len: usize) -> Tensor<S> {
    assert!(max_len >= 1, "max_len must be >= 1");
    let width = alphabet.size();
    let mut data = vec![S::zero(); max_len * width];
    for (row, c) in text.to_lowercase().chars().take(max_len).enumerate() {
        if let Some(i) = alphabet.index_of(c) {
            data[row * width + i] = S::one();
        }
    }
    Tensor::new(vec![max_len, width], data).expect("shape is consistent by construction")
}

/// Resample a column to exactly `max_cells` cells.
///
/// Shorter columns are extended by cells drawn uniformly with
/// replacement from the original; longer columns have uniformly chosen
/// cells removed (the survivors keep their order); equal length is the
/// identity.
pub fn sample_column_cells<R: Rng>(
    column: &Column,
    max_cells: usize,
    rng: &mut R,
) -> Result<Column> {
    assert!(max_cells >= 1, "max_cells must be >= 1");
    let n = column.cells.len();
    if n == 0 {
        return Err(SimonError::DegenerateInput(format!(
            "column '{}' has no cells to sample",
            column.source_name
        )));
    }
    let mut out = column.clone();
    if n < max_cells {
        for _ in n..max_cells {
            let pick = rng.gen_range(0..n);
            out.cells.push(column.cells[pick].clone());
        }
    } else if n > max_cells {
        let mut keep = vec![true; n];
        let mut removed = 0;
        while removed < n - max_cells {
            let pick = rng.gen_range(0..n);
            if keep[pick] {
                keep[pick] = false;
                removed += 1;
            }
        }
        out.cells = column
            .cells
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(c, _)| c.clone())
            .collect();
    }
    Ok(out)
}

/// Sample to `max_cells` cells and encode each: [max_cells, max_len, 71].
pub fn encode_column<S: Scalar, R: Rng>(
    column: &Column,
    alphabet: &Alphabet,
    max_len: usize,
    max_cells: usize,
    rng: &mut R,
) -> Result<Tensor<S>> {
    let sampled = sample_column_cells(column, max_cells, rng)?;
    let width = alphabet.size();
    let mut data = Vec::with_capacity(max_cells * max_len * width);
    for cell in &sampled.cells {
        data.extend_from_slice(encode_cell::<S>(cell, alphabet, max_len).data());
    }
    Tensor::new(vec![max_cells, max_len, width], data)
}
