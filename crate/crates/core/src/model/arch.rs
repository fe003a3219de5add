use std::fmt;

use crate::error::{Error, Result};

/// Default upper bound on layers per hidden unit (shallow backprop depth).
pub const DEFAULT_MAX_UNIT_DEPTH: usize = 3;

/// Layer widths of one hidden unit. The last width is the selected group;
/// the preceding widths form the unit interior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenUnitSpec {
    pub layer_widths: Vec<usize>,
}

impl HiddenUnitSpec {
    pub fn group_width(&self) -> usize {
        *self.layer_widths.last().expect("unit specs are nonempty")
    }

    pub fn depth(&self) -> usize {
        self.layer_widths.len()
    }

    pub fn is_singleton(&self) -> bool {
        self.layer_widths.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub input_width: usize,
    pub units: Vec<HiddenUnitSpec>,
    /// Output classes of the softmax head used by the backprop baseline.
    pub bp_head_width: Option<usize>,
}

impl ArchSpec {
    pub fn new(input_width: usize, units: Vec<HiddenUnitSpec>) -> Result<Self> {
        let arch = ArchSpec {
            input_width,
            units,
            bp_head_width: None,
        };
        arch.validate(usize::MAX)?;
        Ok(arch)
    }

    pub fn with_bp_head(mut self, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Arch("bp head width must be positive".into()));
        }
        self.bp_head_width = Some(classes);
        Ok(self)
    }

    pub fn validate(&self, max_depth: usize) -> Result<()> {
        if self.input_width == 0 {
            return Err(Error::Arch("input width must be positive".into()));
        }
        if self.units.is_empty() {
            return Err(Error::Arch("at least one hidden unit is required".into()));
        }
        for (k, u) in self.units.iter().enumerate() {
            if u.layer_widths.is_empty() || u.layer_widths.contains(&0) {
                return Err(Error::Arch(format!("unit {k} has an empty or zero width")));
            }
            if u.depth() > max_depth {
                return Err(Error::Arch(format!(
                    "unit {k} has {} layers, above the limit of {max_depth}",
                    u.depth()
                )));
            }
        }
        Ok(())
    }

    /// Input width of unit `k`: the previous unit's group width, or the input.
    pub fn unit_input_width(&self, k: usize) -> usize {
        if k == 0 {
            self.input_width
        } else {
            self.units[k - 1].group_width()
        }
    }

    pub fn all_singleton(&self) -> bool {
        self.units.iter().all(HiddenUnitSpec::is_singleton)
    }

    /// Sum of all selected-group widths.
    pub fn total_group_width(&self) -> usize {
        self.units.iter().map(HiddenUnitSpec::group_width).sum()
    }
}

/// Renders the canonical form, e.g. `784,(100,50),(30,10)`.
impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input_width)?;
        for u in &self.units {
            if u.is_singleton() {
                write!(f, ",{}", u.layer_widths[0])?;
            } else {
                let inner: Vec<String> = u.layer_widths.iter().map(usize::to_string).collect();
                write!(f, ",({})", inner.join(","))?;
            }
        }
        Ok(())
    }
}

pub fn parse_arch(spec: &str) -> Result<ArchSpec> {
    parse_arch_with_depth(spec, DEFAULT_MAX_UNIT_DEPTH)
}

/// Parses the tuple notation `784,(100,50),(30,10)`.
///
/// The first token is the input width. Every later bare integer is a
/// single-layer unit; every parenthesized group is one multi-layer unit.
/// Whitespace is ignored and one optional pair of outer parentheses is
/// accepted, so `(784, (200, 200, 200), (50, 50))` parses too.
pub fn parse_arch_with_depth(spec: &str, max_depth: usize) -> Result<ArchSpec> {
    let mut p = Parser {
        bytes: spec.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let outer = p.peek() == Some(b'(');
    let outer_at = p.pos;
    if outer {
        p.pos += 1;
    }

    let input_width = p.integer()?;
    let mut units = Vec::new();
    loop {
        p.skip_ws();
        match p.peek() {
            None => break,
            Some(b')') if outer => break,
            Some(b',') => p.pos += 1,
            Some(_) => return Err(p.error("expected ','")),
        }
        p.skip_ws();
        if p.peek() == Some(b'(') {
            let open = p.pos;
            p.pos += 1;
            let mut widths = vec![p.integer()?];
            loop {
                p.skip_ws();
                match p.peek() {
                    Some(b',') => {
                        p.pos += 1;
                        widths.push(p.integer()?);
                    }
                    Some(b')') => {
                        p.pos += 1;
                        break;
                    }
                    None => {
                        return Err(Error::ArchParse {
                            offset: open,
                            message: "unclosed '('".into(),
                        })
                    }
                    Some(_) => return Err(p.error("expected ',' or ')'")),
                }
            }
            units.push(HiddenUnitSpec {
                layer_widths: widths,
            });
        } else {
            units.push(HiddenUnitSpec {
                layer_widths: vec![p.integer()?],
            });
        }
    }
    if outer {
        if p.peek() != Some(b')') {
            return Err(Error::ArchParse {
                offset: outer_at,
                message: "unclosed '('".into(),
            });
        }
        p.pos += 1;
        p.skip_ws();
        if p.peek().is_some() {
            return Err(p.error("trailing input after ')'"));
        }
    }
    if units.is_empty() {
        return Err(p.error("expected at least one hidden unit after the input width"));
    }

    let arch = ArchSpec {
        input_width,
        units,
        bp_head_width: None,
    };
    arch.validate(max_depth)?;
    Ok(arch)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::ArchParse {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.peek() {
                None => self.error("unexpected end of input, expected an integer"),
                Some(b')') => self.error("empty group"),
                Some(_) => self.error("expected an integer"),
            });
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        let value: usize = text.parse().map_err(|_| Error::ArchParse {
            offset: start,
            message: format!("integer `{text}` out of range"),
        })?;
        if value == 0 {
            return Err(Error::ArchParse {
                offset: start,
                message: "width must be positive".into(),
            });
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn widths(a: &ArchSpec) -> Vec<Vec<usize>> {
        a.units.iter().map(|u| u.layer_widths.clone()).collect()
    }

    #[test]
    fn grouped_units() {
        let a = parse_arch("784,(100,50),(30,10)").unwrap();
        assert_eq!(a.input_width, 784);
        assert_eq!(widths(&a), vec![vec![100, 50], vec![30, 10]]);
        assert_eq!(a.to_string(), "784,(100,50),(30,10)");
    }

    #[test]
    fn bare_integers_are_singleton_units() {
        let a = parse_arch("784,100,50,30,10").unwrap();
        assert_eq!(widths(&a), vec![vec![100], vec![50], vec![30], vec![10]]);
        assert!(a.all_singleton());
        assert_eq!(a.to_string(), "784,100,50,30,10");
    }

    #[test]
    fn spaced_and_outer_parenthesized_forms() {
        let a = parse_arch("(784, (200, 200, 200), (50, 50))").unwrap();
        assert_eq!(widths(&a), vec![vec![200, 200, 200], vec![50, 50]]);
        let b = parse_arch("784,(100,100),(100,100),10").unwrap();
        assert_eq!(b.units.len(), 3);
        assert_eq!(b.unit_input_width(2), 100);
    }

    #[test]
    fn unclosed_group_reports_its_offset() {
        match parse_arch("784,(100") {
            Err(Error::ArchParse { offset, message }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("unclosed"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        for bad in ["", "784", "784,", "784,()", "784,0", "784,a", "784,(10,)", "784,(10))", "x,10"] {
            assert!(parse_arch(bad).is_err(), "{bad:?} should fail");
        }
        assert!(matches!(
            parse_arch("784,()"),
            Err(Error::ArchParse { offset: 5, .. })
        ));
    }

    #[test]
    fn depth_limit() {
        assert!(parse_arch("8,(4,4,4,4)").is_err());
        assert!(parse_arch_with_depth("8,(4,4,4,4)", 4).is_ok());
    }
}
