//! Pretty-printer. Output reparses to the same tree.

use std::fmt::Write;

use super::ast::*;

pub fn format_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, item) in p.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        item_into(&mut out, item);
    }
    out
}

fn item_into(out: &mut String, item: &Item) {
    match item {
        Item::Include(path, _) => {
            let _ = writeln!(out, "include {};", quote(path));
        }
        Item::Struct(s) => fields_into(out, "struct", &s.name, &s.fields),
        Item::Class(c) => fields_into(out, "class", &c.name, &c.fields),
        Item::Enum(e) => {
            let variants: Vec<String> = e
                .variants
                .iter()
                .map(|(n, v)| format!("{n} = {v}"))
                .collect();
            let _ = writeln!(out, "enum {} {{ {} }};", e.name, variants.join(", "));
        }
        Item::Global(g) => {
            out.push_str(&decl(g));
            out.push('\n');
        }
        Item::Function(f) => {
            let params: Vec<String> = f
                .params
                .iter()
                .map(|p| format!("{} {}", p.ty, p.name))
                .collect();
            let _ = write!(out, "{} {}({}) ", f.ret, f.name, params.join(", "));
            block_into(out, &f.body, 0);
            out.push('\n');
        }
    }
}

fn fields_into(out: &mut String, kw: &str, name: &str, fields: &[FieldDecl]) {
    let _ = writeln!(out, "{kw} {name} {{");
    for f in fields {
        let _ = writeln!(out, "    {} {};", f.ty, f.name);
    }
    out.push_str("};\n");
}

fn decl(d: &VarDecl) -> String {
    match &d.init {
        Some(e) => format!("{} {} = {};", d.ty, d.name, format_expr(e)),
        None => format!("{} {};", d.ty, d.name),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block_into(out: &mut String, body: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in body {
        stmt_into(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn stmt_into(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::VarDecl(d) => out.push_str(&decl(d)),
        StmtKind::Assign(l, r) => {
            let _ = write!(out, "{} = {};", format_expr(l), format_expr(r));
        }
        StmtKind::If(c, t, e) => {
            let _ = write!(out, "if ({}) ", format_expr(c));
            block_into(out, t, depth);
            if !e.is_empty() {
                out.push_str(" else ");
                block_into(out, e, depth);
            }
        }
        StmtKind::Switch(x, cases) => {
            let _ = writeln!(out, "switch ({}) {{", format_expr(x));
            for case in cases {
                indent(out, depth + 1);
                match &case.label {
                    Some(l) => {
                        let _ = writeln!(out, "case {}:", format_expr(l));
                    }
                    None => out.push_str("default:\n"),
                }
                for s in &case.body {
                    stmt_into(out, s, depth + 2);
                }
            }
            indent(out, depth);
            out.push('}');
        }
        StmtKind::While(c, b) => {
            let _ = write!(out, "while ({}) ", format_expr(c));
            block_into(out, b, depth);
        }
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {};", format_expr(e));
        }
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Break => out.push_str("break;"),
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", format_expr(e));
        }
    }
    out.push('\n');
}

fn quote(s: &str) -> String {
    let mut q = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            q.push('\\');
        }
        q.push(c);
    }
    q.push('"');
    q
}

pub fn format_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr_into(&mut out, e);
    out
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Neg(_) | ExprKind::Not(_) => 6,
        _ => 7,
    }
}

fn wrapped(out: &mut String, e: &Expr, paren: bool) {
    if paren {
        out.push('(');
        expr_into(out, e);
        out.push(')');
    } else {
        expr_into(out, e);
    }
}

fn expr_into(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Number(n) => out.push_str(n),
        ExprKind::Str(s) => out.push_str(&quote(s)),
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Member(b, f) => {
            wrapped(out, b, prec(b) < 7);
            out.push('.');
            out.push_str(f);
        }
        ExprKind::Index(b, i) => {
            wrapped(out, b, prec(b) < 7);
            out.push('[');
            expr_into(out, i);
            out.push(']');
        }
        ExprKind::Neg(a) => {
            out.push('-');
            wrapped(out, a, prec(a) < 6);
        }
        ExprKind::Not(a) => {
            out.push('!');
            wrapped(out, a, prec(a) < 6);
        }
        ExprKind::Binary(op, a, b) => {
            let p = op.precedence();
            wrapped(out, a, prec(a) < p);
            let _ = write!(out, " {} ", op.symbol());
            wrapped(out, b, prec(b) <= p);
        }
        ExprKind::Call(callee, args) => {
            match callee {
                Callee::Name(n) => out.push_str(n),
                Callee::Method(recv, m) => {
                    wrapped(out, recv, prec(recv) < 7);
                    out.push('.');
                    out.push_str(m);
                }
            }
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr_into(out, a);
            }
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::lexer::tokenize;
    use super::super::parser::parse_program;
    use super::*;
    use proptest::prelude::*;

    fn parse(src: &str) -> Program {
        parse_program(&tokenize(src).unwrap()).unwrap_or_else(|e| panic!("{e}\n{src}"))
    }

    #[test]
    fn minimal_parentheses() {
        let p = parse("void f() { x = (a - b) - (c - d) * -(e + 1.0); }");
        let text = format_program(&p);
        assert!(text.contains("x = a - b - (c - d) * -(e + 1.0);"), "{text}");
        assert_eq!(parse(&text), p);
    }

    #[test]
    fn full_program_round_trip() {
        let src = r#"
            include "shared.ml4u";
            enum F { A, B = 3 }
            struct s_t { F frame; float v[]; };
            class C { int k; int m(int a) { return a; } };
            C c;
            float g = 2.0;
            void h(s_t s) {
                if (s.frame != A && !(s.v[0] < 1.0)) { log("bad \"frame\""); return; } else if (g > 1) { g = 1; }
                switch (s.frame) { case A: g = c.m(1); break; default: while (g > 0) { g = g - 1; } }
            }
        "#;
        let p = parse(src);
        let once = format_program(&p);
        assert_eq!(parse(&once), p);
        assert_eq!(format_program(&parse(&once)), once);
    }

    fn leaf() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-e]",
            "[0-9]{1,3}(\\.[0-9]{1,2})?f?",
            "[a-c]\\.[xyz]",
            "[a-c]\\[[0-9]\\]",
            Just("\"s\"".to_string()),
        ]
    }

    fn expr_src() -> impl Strategy<Value = String> {
        leaf().prop_recursive(5, 40, 3, |inner| {
            let ops = prop::sample::select(vec![
                "+", "-", "*", "/", "==", "!=", "<", ">", "<=", ">=", "&&", "||",
            ]);
            prop_oneof![
                (inner.clone(), ops, inner.clone()).prop_map(|(a, o, b)| format!("{a} {o} {b}")),
                inner.clone().prop_map(|a| format!("({a})")),
                inner.clone().prop_map(|a| format!("-{a}")),
                inner.clone().prop_map(|a| format!("!{a}")),
                prop::collection::vec(inner, 0..3).prop_map(|v| format!("f({})", v.join(", "))),
            ]
        })
    }

    fn stmt_src() -> impl Strategy<Value = String> {
        let simple = prop_oneof![
            expr_src().prop_map(|e| format!("x = {e};")),
            expr_src().prop_map(|e| format!("float y = {e};")),
            expr_src().prop_map(|e| format!("g({e});")),
            expr_src().prop_map(|e| format!("return {e};")),
            Just("return;".to_string()),
        ];
        simple.prop_recursive(3, 20, 3, |inner| {
            prop_oneof![
                (
                    expr_src(),
                    prop::collection::vec(inner.clone(), 0..3),
                    prop::collection::vec(inner.clone(), 0..2)
                )
                    .prop_map(|(c, t, e)| format!(
                        "if ({c}) {{ {} }} else {{ {} }}",
                        t.join(" "),
                        e.join(" ")
                    )),
                (expr_src(), prop::collection::vec(inner.clone(), 0..3))
                    .prop_map(|(c, b)| format!("while ({c}) {{ {} }}", b.join(" "))),
                (expr_src(), prop::collection::vec(inner, 0..3)).prop_map(|(c, b)| format!(
                    "switch ({c}) {{ case 1: {} break; default: return; }}",
                    b.join(" ")
                )),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn parse_format_parse(body in prop::collection::vec(stmt_src(), 0..5)) {
            let src = format!("struct s_t {{ float x; }};\nfloat k(s_t a, int b) {{ {} }}", body.join("\n"));
            let p1 = parse(&src);
            let text = format_program(&p1);
            let p2 = parse(&text);
            prop_assert_eq!(&p1, &p2);
        }

        #[test]
        fn spans_nest(body in prop::collection::vec(stmt_src(), 1..4)) {
            let src = format!("void k() {{ {} }}", body.join("\n"));
            let p = parse(&src);
            let f = p.functions().next().unwrap();
            fn check_stmt(parent: &Span, s: &Stmt) {
                assert!(parent.contains(&s.span));
                let exprs: Vec<&Expr> = match &s.kind {
                    StmtKind::VarDecl(d) => d.init.iter().collect(),
                    StmtKind::Assign(a, b) => vec![a, b],
                    StmtKind::If(c, ..) | StmtKind::While(c, _) | StmtKind::Switch(c, _) => vec![c],
                    StmtKind::Return(e) => e.iter().collect(),
                    StmtKind::Expr(e) => vec![e],
                    StmtKind::Break => vec![],
                };
                for e in exprs {
                    assert!(s.span.contains(&e.span));
                    check_expr(e);
                }
                match &s.kind {
                    StmtKind::If(_, t, e) => t.iter().chain(e).for_each(|c| check_stmt(&s.span, c)),
                    StmtKind::While(_, b) => b.iter().for_each(|c| check_stmt(&s.span, c)),
                    StmtKind::Switch(_, cases) => cases.iter().flat_map(|c| &c.body).for_each(|c| check_stmt(&s.span, c)),
                    _ => {}
                }
            }
            fn check_expr(e: &Expr) {
                e.walk(&mut |p| {
                    let kids: Vec<&Expr> = match &p.kind {
                        ExprKind::Member(b, _) | ExprKind::Neg(b) | ExprKind::Not(b) => vec![b],
                        ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => vec![a, b],
                        ExprKind::Call(Callee::Method(r, _), args) => std::iter::once(&**r).chain(args).collect(),
                        ExprKind::Call(_, args) => args.iter().collect(),
                        _ => vec![],
                    };
                    for k in kids {
                        assert!(p.span.contains(&k.span), "{p:?}");
                    }
                });
            }
            for s in &f.body {
                check_stmt(&f.span, s);
            }
        }
    }
}
