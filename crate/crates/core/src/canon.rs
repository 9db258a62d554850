//! Deterministic JSON output: keys in the order they are pushed, floats
//! printed with 17 significant digits, containers of scalars kept on one
//! line.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Null,
    Bool(bool),
    Int(i128),
    /// Already formatted number literal.
    Num(String),
    Str(String),
    Arr(Vec<Node>),
    Obj(Vec<(String, Node)>),
}

impl Node {
    pub fn float(x: f64) -> Node {
        if x.is_finite() {
            Node::Num(g17(x))
        } else {
            Node::Null
        }
    }

    pub fn str(s: impl Into<String>) -> Node {
        Node::Str(s.into())
    }

    pub fn obj() -> ObjBuilder {
        ObjBuilder(Vec::new())
    }

    pub fn strs<S: AsRef<str>>(items: impl IntoIterator<Item = S>) -> Node {
        Node::Arr(items.into_iter().map(|s| Node::Str(s.as_ref().to_string())).collect())
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Node::Arr(_) | Node::Obj(_))
    }

    fn is_flat(&self) -> bool {
        match self {
            Node::Arr(items) => items.iter().all(Node::is_scalar),
            Node::Obj(fields) => fields.iter().all(|(_, v)| v.is_scalar()),
            _ => true,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, depth: usize) {
        match self {
            Node::Null => out.push_str("null"),
            Node::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Node::Int(i) => write!(out, "{i}").unwrap(),
            Node::Num(n) => out.push_str(n),
            Node::Str(s) => out.push_str(&quote(s)),
            Node::Arr(items) if items.is_empty() => out.push_str("[]"),
            Node::Obj(fields) if fields.is_empty() => out.push_str("{}"),
            Node::Arr(items) if self.is_flat() => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write(out, depth);
                }
                out.push(']');
            }
            Node::Obj(fields) if self.is_flat() => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&quote(k));
                    out.push_str(": ");
                    v.write(out, depth);
                }
                out.push('}');
            }
            Node::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    out.push_str(if i > 0 { ",\n" } else { "\n" });
                    indent(out, depth + 1);
                    item.write(out, depth + 1);
                }
                out.push('\n');
                indent(out, depth);
                out.push(']');
            }
            Node::Obj(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    out.push_str(if i > 0 { ",\n" } else { "\n" });
                    indent(out, depth + 1);
                    out.push_str(&quote(k));
                    out.push_str(": ");
                    v.write(out, depth + 1);
                }
                out.push('\n');
                indent(out, depth);
                out.push('}');
            }
        }
    }
}

pub struct ObjBuilder(Vec<(String, Node)>);

impl ObjBuilder {
    pub fn field(mut self, key: &str, value: Node) -> Self {
        self.0.push((key.to_string(), value));
        self
    }

    pub fn opt(self, key: &str, value: Option<Node>) -> Self {
        match value {
            Some(v) => self.field(key, v),
            None => self,
        }
    }

    pub fn build(self) -> Node {
        Node::Obj(self.0)
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros
/// dropped, exponent form outside `1e-4 <= |x| < 1e17`. Always round-trips.
pub fn g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if x < 0.0 { "-" } else { "" };
    if (-4..17).contains(&exp) {
        let body = if exp >= 0 {
            let split = exp as usize + 1;
            let (int, frac) = digits.split_at(split);
            join_fraction(int, frac)
        } else {
            let zeros = "0".repeat((-exp - 1) as usize);
            join_fraction("0", &format!("{zeros}{digits}"))
        };
        format!("{sign}{body}")
    } else {
        let (lead, rest) = digits.split_at(1);
        let m = join_fraction(lead, rest);
        let esign = if exp < 0 { '-' } else { '+' };
        format!("{sign}{m}e{esign}{:02}", exp.abs())
    }
}

fn join_fraction(int: &str, frac: &str) -> String {
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        int.to_string()
    } else {
        format!("{int}.{frac}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_c_printf() {
        // Reference strings from printf("%.17g").
        assert_eq!(g17(0.7), "0.69999999999999996");
        assert_eq!(g17(0.3), "0.29999999999999999");
        assert_eq!(g17(0.5), "0.5");
        assert_eq!(g17(1.0), "1");
        assert_eq!(g17(0.0), "0");
        assert_eq!(g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(g17(0.0001), "0.0001");
        assert_eq!(g17(123.25), "123.25");
        assert_eq!(g17(-2.5), "-2.5");
        assert_eq!(g17(1e17), "1e+17");
        assert_eq!(g17(35.0 / 94.0), "0.37234042553191488");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = g17(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
            prop_assert!(serde_json::from_str::<f64>(&s).is_ok());
        }
    }

    #[test]
    fn flat_containers_stay_inline() {
        let n = Node::obj()
            .field("a", Node::Int(1))
            .field("b", Node::strs(["x", "y"]))
            .field("c", Node::Arr(vec![]))
            .build();
        assert_eq!(n.render(), "{\n  \"a\": 1,\n  \"b\": [\"x\", \"y\"],\n  \"c\": []\n}\n");
    }
}
