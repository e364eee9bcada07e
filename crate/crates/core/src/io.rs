//! Serde adapters for complex data. Complex scalars are written as
//! two-element `[re, im]` arrays; matrices are column-major.

use faer::{c64, Mat};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[c64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|z| [z.re, z.im])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<c64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| c64::new(re, im)).collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    #[serde(with = "complex_vec")]
    data: Vec<c64>,
}

pub mod complex_mat {
    use super::*;
    use serde::de::Error as _;

    pub fn serialize<S: Serializer>(m: &Mat<c64>, s: S) -> Result<S::Ok, S::Error> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                data.push(m[(i, j)]);
            }
        }
        MatrixRepr {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat<c64>, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        if repr.data.len() != repr.rows * repr.cols {
            return Err(D::Error::custom(format!(
                "matrix data has {} entries, expected {}x{}",
                repr.data.len(),
                repr.rows,
                repr.cols
            )));
        }
        Ok(Mat::from_fn(repr.rows, repr.cols, |i, j| {
            repr.data[j * repr.rows + i]
        }))
    }
}
