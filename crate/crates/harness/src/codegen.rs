//! C source for a reference module that accepts exactly what
//! `check_packet` accepts, with a trace line per evaluated constraint.

use std::collections::BTreeSet;
use std::fmt::Write;

use speclift_core::spec::ast::{BinOp, Constraint, Expr, FieldDef, FieldType, FormatSpec, Section};

use crate::HarnessError;

/// Intermediate values are held in a signed 128-bit integer.
const WIDE_BITS: u32 = 126;

struct Emitter {
    out: String,
    depth: usize,
}

impl Emitter {
    fn line(&mut self, s: &str) {
        for _ in 0..self.depth {
            self.out.push('\t');
        }
        self.out.push_str(s);
        self.out.push('\n');
    }
}

/// Largest magnitude, in bits, of `e` itself.
fn bits_bound(e: &Expr, widths: &dyn Fn(&str) -> u32) -> u32 {
    match e {
        Expr::Lit(v) => 64 - v.leading_zeros(),
        Expr::Field(n) => widths(n),
        Expr::TotalLen => 64,
        Expr::Not(_) => 1,
        Expr::Binary(op, l, r) => {
            let (a, b) = (bits_bound(l, widths), bits_bound(r, widths));
            match op {
                BinOp::Add | BinOp::Sub => a.max(b) + 1,
                BinOp::Mul => a + b,
                _ => 1,
            }
        }
    }
}

/// Largest magnitude, in bits, of any subexpression of `e`.
fn widest(e: &Expr, widths: &dyn Fn(&str) -> u32) -> u32 {
    let own = bits_bound(e, widths);
    match e {
        Expr::Not(inner) => own.max(widest(inner, widths)),
        Expr::Binary(_, l, r) => own.max(widest(l, widths)).max(widest(r, widths)),
        _ => own,
    }
}

fn c_expr(e: &Expr) -> String {
    match e {
        Expr::Lit(v) => format!("((wide){v}ULL)"),
        Expr::Field(n) => format!("((wide)f_{n})"),
        Expr::TotalLen => "total_len".into(),
        Expr::Not(inner) => format!("(!{})", c_expr(inner)),
        Expr::Binary(op, l, r) => {
            let sym = match op {
                BinOp::And => "&&",
                BinOp::Or => "||",
                other => other.symbol(),
            };
            format!("({} {sym} {})", c_expr(l), c_expr(r))
        }
    }
}

fn collect_names(sections: &[Section], names: &mut BTreeSet<String>) {
    for s in sections {
        match s {
            Section::Record(r) => {
                for f in &r.fields {
                    names.insert(f.name.clone());
                    if let FieldType::Bytes { len } = &f.ty {
                        names.extend(len.field_refs().into_iter().map(str::to_string));
                    }
                    for c in &f.constraints {
                        names.extend(c.expr.field_refs().into_iter().map(str::to_string));
                    }
                }
            }
            Section::Conditional(c) => {
                names.extend(c.guard.expr.field_refs().into_iter().map(str::to_string));
                collect_names(&c.body, names);
            }
            Section::Variant(v) => {
                names.insert(v.discriminator.clone());
                for a in &v.arms {
                    collect_names(&a.body, names);
                }
                if let Some(d) = &v.default {
                    collect_names(d, names);
                }
            }
        }
    }
}

struct Gen<'s> {
    spec: &'s FormatSpec,
    e: Emitter,
}

impl Gen<'_> {
    fn width(&self, name: &str) -> u32 {
        self.spec
            .all_fields()
            .iter()
            .filter(|f| f.name == name)
            .map(|f| match f.ty {
                FieldType::UInt { bits } => bits,
                FieldType::Bytes { .. } => 64,
            })
            .max()
            .unwrap_or(64)
    }

    fn checked(&self, e: &Expr) -> Result<String, HarnessError> {
        if widest(e, &|n| self.width(n)) > WIDE_BITS {
            return Err(HarnessError::Codegen(format!("`{e}` may exceed {WIDE_BITS} bits")));
        }
        Ok(c_expr(e))
    }

    /// Rejects when `e` references a field that has not been decoded.
    fn require_bound(&mut self, e: &Expr) {
        let refs = e.field_refs();
        if refs.is_empty() {
            return;
        }
        let cond: Vec<String> = refs.iter().map(|n| format!("!h_{n}")).collect();
        self.e.line(&format!("if ({})", cond.join(" || ")));
        self.e.line("\treturn 0;");
    }

    fn constraint(&mut self, c: &Constraint) -> Result<(), HarnessError> {
        self.require_bound(&c.expr);
        let x = self.checked(&c.expr)?;
        self.e.line(&format!("ok = {x};"));
        self.e.line(&format!("speclift_check(\"{}\", ok);", c.id));
        self.e.line("if (!ok)");
        self.e.line("\treturn 0;");
        Ok(())
    }

    fn field(&mut self, f: &FieldDef) -> Result<(), HarnessError> {
        match &f.ty {
            FieldType::UInt { bits } => {
                self.e.line(&format!("if (!rd_uint(&r, {bits}, &f_{}))", f.name));
                self.e.line("\treturn 0;");
                self.e.line(&format!("h_{} = 1;", f.name));
            }
            FieldType::Bytes { len } => {
                self.e.line("if (r.pos & 7)");
                self.e.line("\treturn 0;");
                self.require_bound(len);
                let x = self.checked(len)?;
                self.e.line(&format!("n = {x};"));
                self.e.line("if (n < 0 || n > (wide)((r.bits - r.pos) >> 3))");
                self.e.line("\treturn 0;");
                self.e.line("r.pos += (uint64_t)n * 8;");
            }
        }
        for c in &f.constraints {
            self.constraint(c)?;
        }
        Ok(())
    }

    fn block(&mut self, sections: &[Section]) -> Result<(), HarnessError> {
        for s in sections {
            match s {
                Section::Record(r) => {
                    for f in &r.fields {
                        self.field(f)?;
                    }
                }
                Section::Conditional(c) => {
                    self.require_bound(&c.guard.expr);
                    let x = self.checked(&c.guard.expr)?;
                    self.e.line(&format!("if ({x}) {{"));
                    self.e.depth += 1;
                    self.block(&c.body)?;
                    self.e.depth -= 1;
                    self.e.line("}");
                }
                Section::Variant(v) => {
                    let d = &v.discriminator;
                    self.e.line(&format!("if (!h_{d})"));
                    self.e.line("\treturn 0;");
                    for (i, arm) in v.arms.iter().enumerate() {
                        let kw = if i == 0 { "if" } else { "} else if" };
                        self.e.line(&format!("{kw} (f_{d} == {}ULL) {{", arm.tag));
                        self.e.depth += 1;
                        self.block(&arm.body)?;
                        self.e.depth -= 1;
                    }
                    let open = !v.arms.is_empty();
                    match &v.default {
                        Some(body) => {
                            self.e.line(if open { "} else {" } else { "{" });
                            self.e.depth += 1;
                            self.block(body)?;
                            self.e.depth -= 1;
                        }
                        None => {
                            self.e.line(if open { "} else {" } else { "{" });
                            self.e.line("\treturn 0;");
                        }
                    }
                    self.e.line("}");
                }
            }
        }
        Ok(())
    }
}

const PRELUDE: &str = r#"#include <stddef.h>
#include <stdint.h>

#include "speclift_harness.h"

typedef __int128 wide;

struct rd {
	const uint8_t *buf;
	uint64_t bits;
	uint64_t pos;
};

static int rd_uint(struct rd *r, unsigned width, uint64_t *out)
{
	uint64_t v = 0;
	unsigned i;

	if (r->bits - r->pos < width)
		return 0;
	for (i = 0; i < width; i++) {
		uint64_t p = r->pos++;
		v = (v << 1) | ((r->buf[p >> 3] >> (7 - (p & 7))) & 1u);
	}
	*out = v;
	return 1;
}
"#;

/// C module for `spec`. Fails when an expression could overflow the
/// module's 128-bit arithmetic.
pub fn emit_c_module(spec: &FormatSpec) -> Result<String, HarnessError> {
    let mut names = BTreeSet::new();
    collect_names(&spec.sections, &mut names);
    for c in &spec.constraints {
        names.extend(c.expr.field_refs().into_iter().map(str::to_string));
    }
    let mut g = Gen { spec, e: Emitter { out: String::new(), depth: 0 } };
    let _ = writeln!(g.e.out, "/* Reference module for format {}. Generated; do not edit. */", spec.name);
    g.e.out.push_str(PRELUDE);
    g.e.line("");
    g.e.line("int speclift_parse(const uint8_t *buf, size_t len)");
    g.e.line("{");
    g.e.depth = 1;
    g.e.line("struct rd r = { buf, (uint64_t)len * 8, 0 };");
    g.e.line("const wide total_len = (wide)len;");
    g.e.line("wide n = 0;");
    g.e.line("int ok = 1;");
    for n in &names {
        g.e.line(&format!("uint64_t f_{n} = 0;"));
        g.e.line(&format!("int h_{n} = 0;"));
    }
    g.e.line("");
    g.block(&spec.sections)?;
    g.e.line("if (r.pos != r.bits)");
    g.e.line("\treturn 0;");
    for c in &spec.constraints {
        g.constraint(c)?;
    }
    g.e.line("(void)n;");
    g.e.line("(void)ok;");
    g.e.line("(void)total_len;");
    g.e.line("return 1;");
    g.e.depth = 0;
    g.e.line("}");
    Ok(g.e.out)
}
