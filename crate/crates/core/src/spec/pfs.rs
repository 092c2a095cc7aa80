use std::fmt::Write;

use super::ast::*;

/// Renders a spec as PFS source. Global constraints go last; the parser
/// accepts them anywhere at the top level, so the output reparses to an
/// equal spec.
pub fn to_pfs(spec: &FormatSpec) -> String {
    let mut out = String::new();
    writeln!(out, "format {} {{", spec.name).unwrap();
    block(&mut out, &spec.sections, 1);
    for c in &spec.constraints {
        writeln!(out, "  where {};", c.expr).unwrap();
    }
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn block(out: &mut String, sections: &[Section], depth: usize) {
    for s in sections {
        match s {
            Section::Record(r) => {
                for f in &r.fields {
                    indent(out, depth);
                    write!(out, "{}: {}", f.name, f.ty).unwrap();
                    for c in &f.constraints {
                        write!(out, " where {}", c.expr).unwrap();
                    }
                    out.push_str(";\n");
                }
            }
            Section::Conditional(c) => {
                indent(out, depth);
                writeln!(out, "if {} {{", c.guard.expr).unwrap();
                block(out, &c.body, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
            Section::Variant(v) => {
                indent(out, depth);
                writeln!(out, "switch {} {{", v.discriminator).unwrap();
                let arms = v.arms.iter().map(|a| (a.tag.to_string(), &a.body));
                for (tag, body) in arms.chain(v.default.iter().map(|d| ("_".to_string(), d))) {
                    indent(out, depth + 1);
                    writeln!(out, "{tag} => {{").unwrap();
                    block(out, body, depth + 2);
                    indent(out, depth + 1);
                    out.push_str("}\n");
                }
                indent(out, depth);
                out.push_str("}\n");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parser::parse_syntax;

    #[test]
    fn reparses_to_equal_spec() {
        let src = "format f { where n == total_len - 2; n: u8 where n >= 1 where n <= 9; switch n { 1 => { a: u8; }, _ => { b: bytes[n - 1]; } } }";
        let s = parse_syntax(src).unwrap();
        let printed = to_pfs(&s);
        assert_eq!(parse_syntax(&printed).unwrap(), s);
        assert!(printed.starts_with("format f {\n  n: u8 where n >= 1 where n <= 9;\n"));
    }
}
