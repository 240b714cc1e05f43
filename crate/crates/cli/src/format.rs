//! Byte-stable rendering of numbers and tables.

use rangelab::AtomCount;

/// 17 significant digits; plain decimal for exponents in `[-5, 16]`, scientific otherwise.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0000000000000000" } else { "0.0000000000000000" }.into();
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..=16).contains(&exp) {
        format!("{x:.*}", (16 - exp) as usize)
    } else {
        sci
    }
}

/// A value stored as its log2: decimal when representable, `2^x` otherwise.
pub fn log2_value(l: f64) -> String {
    let v = l.exp2();
    if l == f64::NEG_INFINITY || (v.is_finite() && v >= f64::MIN_POSITIVE) {
        num(v)
    } else {
        format!("2^{}", num(l))
    }
}

pub fn count(c: &AtomCount) -> String {
    match c {
        AtomCount::Exact(v) => v.to_string(),
        AtomCount::Huge(l) => format!("2^{}", num(l.log2())),
    }
}

/// Comma-joined CSV table with `\n` line endings.
#[derive(Default)]
pub struct Table {
    out: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Table::default();
        t.row(header.iter().map(|s| s.to_string()).collect());
        t
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}
