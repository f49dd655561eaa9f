//! Serialize `DMatrix<f64>` as an array of rows.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    Rows { nrows: m.nrows(), ncols: m.ncols(), rows }.serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    let r = Rows::deserialize(d)?;
    if r.rows.len() != r.nrows || r.rows.iter().any(|row| row.len() != r.ncols) {
        return Err(D::Error::custom("matrix rows do not match declared shape"));
    }
    Ok(DMatrix::from_fn(r.nrows, r.ncols, |i, j| r.rows[i][j]))
}

#[derive(Serialize, Deserialize)]
struct Rows {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<f64>>,
}
