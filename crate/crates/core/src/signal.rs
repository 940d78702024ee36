//! Signal vocabulary and binary semantic-signal vectors.
//!
//! Index layout: `0..K` are room types, `K` is the none-signal (the agent is
//! in no labeled room), `K+1..K+1+K_o` are object types. The room graph used
//! by the model has `K+1` nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vectors are stored as a 64-bit mask.
pub const MAX_SIGNALS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabRecord", into = "VocabRecord")]
pub struct SignalVocabulary {
    room_signals: Vec<String>,
    none_signal: String,
    object_signals: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabRecord {
    rooms: Vec<String>,
    none: String,
    #[serde(default)]
    objects: Vec<String>,
}

impl TryFrom<VocabRecord> for SignalVocabulary {
    type Error = Error;
    fn try_from(r: VocabRecord) -> Result<Self> {
        SignalVocabulary::new(r.rooms, r.none, r.objects)
    }
}

impl From<SignalVocabulary> for VocabRecord {
    fn from(v: SignalVocabulary) -> Self {
        VocabRecord {
            rooms: v.room_signals,
            none: v.none_signal,
            objects: v.object_signals,
        }
    }
}

impl SignalVocabulary {
    pub fn new(rooms: Vec<String>, none: String, objects: Vec<String>) -> Result<Self> {
        if rooms.len() < 2 {
            return Err(Error::InvalidVocabulary(format!(
                "need at least 2 room signals, got {}",
                rooms.len()
            )));
        }
        let total = rooms.len() + 1 + objects.len();
        if total > MAX_SIGNALS {
            return Err(Error::InvalidVocabulary(format!(
                "{total} signals exceed the limit of {MAX_SIGNALS}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in rooms.iter().chain(std::iter::once(&none)).chain(objects.iter()) {
            if name.is_empty() {
                return Err(Error::InvalidVocabulary("empty signal name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidVocabulary(format!("duplicate signal name `{name}`")));
            }
        }
        Ok(SignalVocabulary {
            room_signals: rooms,
            none_signal: none,
            object_signals: objects,
        })
    }

    /// The eight RoomNav room types plus the none-signal, no objects.
    pub fn roomnav() -> Self {
        Self::new(
            crate::world::ROOMNAV_TYPES.iter().map(|s| s.to_string()).collect(),
            "none".into(),
            Vec::new(),
        )
        .expect("static vocabulary is valid")
    }

    /// Number of room types, `K`.
    pub fn k(&self) -> usize {
        self.room_signals.len()
    }

    pub fn k_objects(&self) -> usize {
        self.object_signals.len()
    }

    /// Node count of the room graph, `K+1`.
    pub fn room_nodes(&self) -> usize {
        self.k() + 1
    }

    pub fn none_index(&self) -> usize {
        self.k()
    }

    pub fn object_index(&self, object: usize) -> usize {
        self.room_nodes() + object
    }

    pub fn len(&self) -> usize {
        self.room_nodes() + self.k_objects()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_room_node(&self, index: usize) -> bool {
        index < self.room_nodes()
    }

    pub fn is_object(&self, index: usize) -> bool {
        index >= self.room_nodes() && index < self.len()
    }

    pub fn rooms(&self) -> &[String] {
        &self.room_signals
    }

    pub fn objects(&self) -> &[String] {
        &self.object_signals
    }

    pub fn none_name(&self) -> &str {
        &self.none_signal
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        let k = self.k();
        if index < k {
            Some(&self.room_signals[index])
        } else if index == k {
            Some(&self.none_signal)
        } else {
            self.object_signals.get(index - k - 1).map(String::as_str)
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        (0..self.len()).find(|&i| self.name(i) == Some(name))
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownSignal {
                index,
                len: self.len(),
            })
        }
    }
}

/// A binary semantic signal vector `s_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignalVector {
    bits: u64,
    len: u8,
}

impl SignalVector {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_SIGNALS, "signal vector longer than {MAX_SIGNALS}");
        SignalVector { bits: 0, len: len as u8 }
    }

    pub fn from_indices(len: usize, active: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in active {
            v.set(i, true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len() && self.bits >> i & 1 == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.len(), "bit {i} out of range for length {}", self.len);
        if on {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
    }

    pub fn or(self, other: SignalVector) -> SignalVector {
        debug_assert_eq!(self.len, other.len);
        SignalVector {
            bits: self.bits | other.bits,
            len: self.len,
        }
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.get(i))
    }

    /// Whether any index in `range` is set.
    pub fn any_in(&self, range: std::ops::Range<usize>) -> bool {
        range.into_iter().any(|i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.get(i) as u8).collect()
    }
}

impl Serialize for SignalVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_bits().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SignalVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bits = Vec::<u8>::deserialize(d)?;
        if bits.len() > MAX_SIGNALS {
            return Err(serde::de::Error::custom("signal vector too long"));
        }
        let mut v = SignalVector::zeros(bits.len());
        for (i, b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => v.set(i, true),
                other => {
                    return Err(serde::de::Error::custom(format!("non-binary signal bit {other}")))
                }
            }
        }
        Ok(v)
    }
}

/// Position of unordered pair `(i, j)`, `i != j`, in the row-major upper triangle
/// of an `n`-node matrix.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(a != b && b < n);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// All unordered pairs `(i, j)` with `i < j < n`, in storage order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Symmetric matrix with an unused diagonal, stored as its upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy> SymMatrix<T> {
    pub fn filled(n: usize, value: T) -> Self {
        SymMatrix {
            n,
            data: vec![value; n * n.saturating_sub(1) / 2],
        }
    }

    pub fn from_upper(n: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == n * n.saturating_sub(1) / 2).then_some(SymMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[pair_index(self.n, i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        let idx = pair_index(self.n, i, j);
        &mut self.data[idx]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        *self.get_mut(i, j) = v;
    }

    pub fn upper(&self) -> &[T] {
        &self.data
    }
}

/// Dense row-major `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Grid {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Grid {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        *self.get_mut(r, c) = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).take(self.rows).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}
