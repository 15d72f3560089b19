//! Bundled benchmark data.

use crate::csvio::{read_csv_from, Dataset};
use crate::scalar::Scalar;

const IRIS: &str = include_str!("../data/iris.csv");

/// Fisher's iris: 150 flowers, four measurements in centimetres, species as labels.
pub fn iris<T: Scalar>() -> Dataset<T> {
    read_csv_from(IRIS.as_bytes(), Some("species")).expect("bundled iris data parses")
}
