use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Column,
    Bank,
    Subarray,
    Row,
}

impl Field {
    fn name(self) -> &'static str {
        match self {
            Field::Column => "column",
            Field::Bank => "bank",
            Field::Subarray => "subarray",
            Field::Row => "row",
        }
    }
}

/// Decoded address. `row` is the addressable (logical) row of the subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Location {
    pub bank: usize,
    pub subarray: usize,
    pub row: usize,
    pub column: usize,
    pub offset: usize,
}

/// Mixed-radix address layout. Fields are listed from least to most
/// significant; with power-of-two field sizes this is a plain bit-field split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressMap {
    order: [Field; 4],
    columns: usize,
    banks: usize,
    subarrays: usize,
    rows: usize,
    column_bytes: usize,
}

/// Field order from least to most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldOrder(pub [Field; 4]);

impl Default for FieldOrder {
    fn default() -> Self {
        FieldOrder([Field::Column, Field::Bank, Field::Subarray, Field::Row])
    }
}

impl fmt::Display for FieldOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|x| x.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FieldOrder {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<Field> = s
            .split(',')
            .map(|p| match p.trim() {
                "column" => Ok(Field::Column),
                "bank" => Ok(Field::Bank),
                "subarray" => Ok(Field::Subarray),
                "row" => Ok(Field::Row),
                other => Err(SimError::config(format!("unknown address field {other:?}"))),
            })
            .collect::<Result<_>>()?;
        let order: [Field; 4] = fields
            .try_into()
            .map_err(|_| SimError::config("address order needs exactly four fields"))?;
        for f in [Field::Column, Field::Bank, Field::Subarray, Field::Row] {
            if !order.contains(&f) {
                return Err(SimError::config(format!(
                    "address order is missing {}",
                    f.name()
                )));
            }
        }
        Ok(FieldOrder(order))
    }
}

impl AddressMap {
    pub fn new(
        order: FieldOrder,
        columns: usize,
        banks: usize,
        subarrays: usize,
        rows: usize,
        column_bytes: usize,
    ) -> Result<Self> {
        if [columns, banks, subarrays, rows, column_bytes].contains(&0) {
            return Err(SimError::config("address map fields must be non-empty"));
        }
        let map = Self {
            order: order.0,
            columns,
            banks,
            subarrays,
            rows,
            column_bytes,
        };
        map.capacity()
            .ok_or_else(|| SimError::config("address space exceeds 64 bits"))?;
        Ok(map)
    }

    fn size(&self, f: Field) -> usize {
        match f {
            Field::Column => self.columns,
            Field::Bank => self.banks,
            Field::Subarray => self.subarrays,
            Field::Row => self.rows,
        }
    }

    /// Addressable bytes, or `None` on overflow.
    pub fn capacity(&self) -> Option<u64> {
        self.order
            .iter()
            .try_fold(self.column_bytes as u64, |acc, &f| {
                acc.checked_mul(self.size(f) as u64)
            })
    }

    pub fn addressable_rows(&self) -> usize {
        self.rows
    }

    pub fn decode(&self, address: u64) -> Option<Location> {
        if address >= self.capacity()? {
            return None;
        }
        let mut rest = address;
        let offset = (rest % self.column_bytes as u64) as usize;
        rest /= self.column_bytes as u64;
        let mut loc = Location {
            bank: 0,
            subarray: 0,
            row: 0,
            column: 0,
            offset,
        };
        for &f in &self.order {
            let n = self.size(f) as u64;
            let v = (rest % n) as usize;
            rest /= n;
            match f {
                Field::Column => loc.column = v,
                Field::Bank => loc.bank = v,
                Field::Subarray => loc.subarray = v,
                Field::Row => loc.row = v,
            }
        }
        Some(loc)
    }

    pub fn encode(&self, loc: &Location) -> u64 {
        let mut addr = 0u64;
        for &f in self.order.iter().rev() {
            let v = match f {
                Field::Column => loc.column,
                Field::Bank => loc.bank,
                Field::Subarray => loc.subarray,
                Field::Row => loc.row,
            };
            addr = addr * self.size(f) as u64 + v as u64;
        }
        addr * self.column_bytes as u64 + loc.offset as u64
    }
}
