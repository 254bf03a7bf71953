use std::collections::HashMap;

/// Physical row address within a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub bank: usize,
    pub subarray: usize,
    pub row: usize,
}

impl RowKey {
    pub fn new(bank: usize, subarray: usize, row: usize) -> Self {
        Self {
            bank,
            subarray,
            row,
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Power-on content of one column.
pub fn initial_token(seed: u64, key: RowKey, column: usize) -> u64 {
    let mut h = splitmix(seed);
    for v in [key.bank, key.subarray, key.row, column] {
        h = splitmix(h ^ v as u64);
    }
    h
}

/// Row images, materialized lazily from a seeded power-on pattern.
#[derive(Debug, Clone)]
pub struct DataStore {
    seed: u64,
    columns: usize,
    rows: HashMap<RowKey, Box<[u64]>>,
}

impl DataStore {
    pub fn new(seed: u64, columns: usize) -> Self {
        Self {
            seed,
            columns,
            rows: HashMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn row_mut(&mut self, key: RowKey) -> &mut [u64] {
        let (seed, columns) = (self.seed, self.columns);
        self.rows
            .entry(key)
            .or_insert_with(|| (0..columns).map(|c| initial_token(seed, key, c)).collect())
    }

    pub fn read(&self, key: RowKey, column: usize) -> u64 {
        match self.rows.get(&key) {
            Some(image) => image[column],
            None => initial_token(self.seed, key, column),
        }
    }

    pub fn write(&mut self, key: RowKey, column: usize, token: u64) {
        self.row_mut(key)[column] = token;
    }

    pub fn row_image(&self, key: RowKey) -> Vec<u64> {
        (0..self.columns).map(|c| self.read(key, c)).collect()
    }

    pub fn copy_row(&mut self, src: RowKey, dst: RowKey) {
        let image = self.row_image(src).into_boxed_slice();
        self.rows.insert(dst, image);
    }

    /// Rows touched since power-on.
    pub fn materialized_rows(&self) -> usize {
        self.rows.len()
    }
}
