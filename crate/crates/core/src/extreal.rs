//! Serde adapter for extended reals: finite values are plain JSON numbers,
//! non-finite values are the strings `"+inf"`, `"-inf"` and `"nan"`.

use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;

pub const POS_INF: &str = "+inf";
pub const NEG_INF: &str = "-inf";
pub const NAN: &str = "nan";

/// Text form used in CSV and JSON sentinels.
pub fn label(x: f64) -> Option<&'static str> {
    if x.is_nan() {
        Some(NAN)
    } else if x == f64::INFINITY {
        Some(POS_INF)
    } else if x == f64::NEG_INFINITY {
        Some(NEG_INF)
    } else {
        None
    }
}

pub fn parse_label(s: &str) -> Option<f64> {
    match s {
        POS_INF | "inf" | "Infinity" => Some(f64::INFINITY),
        NEG_INF | "-Infinity" => Some(f64::NEG_INFINITY),
        NAN | "NaN" => Some(f64::NAN),
        _ => None,
    }
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    match label(*x) {
        Some(l) => s.serialize_str(l),
        None => s.serialize_f64(*x),
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    struct V;
    impl Visitor<'_> for V {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or one of \"+inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            parse_label(v).ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
        }
    }
    d.deserialize_any(V)
}
