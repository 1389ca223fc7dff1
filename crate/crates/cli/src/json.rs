//! JSON output with every float written to 17 significant digits, which is
//! enough for any `f64` to parse back to the same bits. Non-finite values are
//! written as `null`.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

/// Wraps a formatter, replacing its float output.
struct Digits17<F>(F);

fn write_digits<W: ?Sized + io::Write>(w: &mut W, v: f64) -> io::Result<()> {
    // serde_json routes non-finite values to `write_null` itself; this is
    // only reached for finite ones.
    write!(w, "{v:.16e}")
}

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_digits(w, v)
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_digits(w, v as f64)
    }

    // Everything else is delegated so pretty printing keeps its layout.
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_string<T: Serialize>(value: &T, pretty: bool) -> serde_json::Result<String> {
    let mut out = Vec::new();
    if pretty {
        let mut ser = Serializer::with_formatter(&mut out, Digits17(PrettyFormatter::new()));
        value.serialize(&mut ser)?;
    } else {
        let mut ser = Serializer::with_formatter(&mut out, Digits17(serde_json::ser::CompactFormatter));
        value.serialize(&mut ser)?;
    }
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_their_bits() {
        let vals: [f64; 8] = [0.1, 1.0 / 3.0, -2.5e-300, 1e308, 5e-324, 0.0, -0.0, 123456789.0];
        let s = to_string(&vals, false).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits(), "{s}");
        }
        assert!(s.starts_with("[1.0000000000000001e-1,"));
    }

    #[test]
    fn non_finite_becomes_null() {
        let s = to_string(&[f64::NAN, f64::INFINITY, 1.0], false).unwrap();
        assert_eq!(s, "[null,null,1.0000000000000000e0]");
    }

    #[test]
    fn pretty_output_parses() {
        let v = serde_json::json!({"a": [1.5, 2], "b": {"c": null}});
        let s = to_string(&v, true).unwrap();
        assert!(s.contains('\n'));
        assert_eq!(serde_json::from_str::<serde_json::Value>(&s).unwrap()["a"][0], 1.5);
    }
}
