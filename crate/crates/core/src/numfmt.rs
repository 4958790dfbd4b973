//! Real numbers in output files: 17 significant digits, scientific notation.
//! Every finite `f64` round-trips exactly through this form.

use serde::ser::{Error as _, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

struct Real(f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!(
                "cannot serialize non-finite value {}",
                self.0
            )));
        }
        let raw = RawValue::from_string(real(self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    Real(*x).serialize(s)
}

pub fn ser_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        seq.serialize_element(&Real(x))?;
    }
    seq.end()
}
