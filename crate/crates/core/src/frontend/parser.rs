//! Recursive-descent parser.

use super::ast::*;
use super::lexer::{Tok, Token};
use super::FrontendError;

pub struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    next_id: ExprId,
    file: u32,
    /// Functions defined inline in class bodies, emitted after the class.
    pending: Vec<FunctionDef>,
}

/// Parses a token sequence into a [`Program`]. Expression ids start at 0.
pub fn parse_program(tokens: &[Token]) -> Result<Program, FrontendError> {
    let (items, _) = parse_items(tokens, 0, 0)?;
    Ok(Program {
        items,
        files: vec!["<input>".to_string()],
    })
}

/// Parses the items of one file; returns the next free expression id.
pub fn parse_items(
    tokens: &[Token],
    file: u32,
    first_id: ExprId,
) -> Result<(Vec<Item>, ExprId), FrontendError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        next_id: first_id,
        file,
        pending: Vec::new(),
    };
    let mut items = Vec::new();
    while !p.at_end() {
        items.push(p.item()?);
        items.extend(p.pending.drain(..).map(Item::Function));
    }
    Ok((items, p.next_id))
}

type PResult<T> = Result<T, FrontendError>;

impl<'t> Parser<'t> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + n).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        match self.tokens.get(self.pos).or_else(|| self.tokens.last()) {
            Some(t) if self.pos < self.tokens.len() => t.span,
            Some(t) => Span {
                lo: t.span.hi,
                hi: t.span.hi,
                ..t.span
            },
            None => Span {
                file: self.file,
                line: 1,
                col: 1,
                ..Span::default()
            },
        }
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn error(&self, expected: &str) -> FrontendError {
        let s = self.span();
        let found = match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".to_string(),
        };
        FrontendError::Parse {
            file: self.file,
            line: s.line,
            col: s.col,
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if self.eat(&tok) {
            Ok(self.prev_span())
        } else {
            Err(self.error(&format!("{tok}")))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn mk(&mut self, kind: ExprKind, span: Span) -> Expr {
        let id = self.next_id;
        self.next_id += 1;
        Expr { id, kind, span }
    }

    fn starts_type(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Int | Tok::Float | Tok::U32 | Tok::Void | Tok::Const)
        )
    }

    fn ty(&mut self) -> PResult<TypeRef> {
        self.eat(&Tok::Const);
        let mut t = match self.peek() {
            Some(Tok::Int) => TypeRef::Int,
            Some(Tok::Float) => TypeRef::Float,
            Some(Tok::U32) => TypeRef::U32,
            Some(Tok::Void) => TypeRef::Void,
            Some(Tok::Ident(n)) => TypeRef::Named(n.clone()),
            _ => return Err(self.error("type")),
        };
        self.pos += 1;
        while self.peek() == Some(&Tok::LBracket) && self.peek_at(1) == Some(&Tok::RBracket) {
            self.pos += 2;
            t = TypeRef::Array(Box::new(t));
        }
        self.eat(&Tok::Amp);
        Ok(t)
    }

    /// C-style declarator suffix: `name[]` or `name[N]`.
    fn array_suffix(&mut self, mut ty: TypeRef) -> PResult<TypeRef> {
        while self.eat(&Tok::LBracket) {
            if let Some(Tok::Number(_)) = self.peek() {
                self.pos += 1;
            }
            self.expect(Tok::RBracket)?;
            ty = TypeRef::Array(Box::new(ty));
        }
        Ok(ty)
    }

    fn item(&mut self) -> PResult<Item> {
        let start = self.span();
        match self.peek() {
            Some(Tok::Include) => {
                self.pos += 1;
                let path = match self.peek() {
                    Some(Tok::Str(s)) => s.clone(),
                    _ => return Err(self.error("include path string")),
                };
                self.pos += 1;
                self.expect(Tok::Semi)?;
                Ok(Item::Include(path, start.to(self.prev_span())))
            }
            Some(Tok::Struct) => {
                self.pos += 1;
                let name = self.ident()?;
                let fields = self.field_block(None)?;
                self.eat(&Tok::Semi);
                Ok(Item::Struct(StructDecl {
                    name,
                    fields,
                    span: start.to(self.prev_span()),
                }))
            }
            Some(Tok::Class) => {
                self.pos += 1;
                let name = self.ident()?;
                let fields = self.field_block(Some(&name))?;
                self.eat(&Tok::Semi);
                Ok(Item::Class(ClassDecl {
                    name,
                    fields,
                    span: start.to(self.prev_span()),
                }))
            }
            Some(Tok::Enum) => {
                self.pos += 1;
                let name = self.ident()?;
                self.expect(Tok::LBrace)?;
                let mut variants = Vec::new();
                let mut next = 0i64;
                while !self.eat(&Tok::RBrace) {
                    let v = self.ident()?;
                    if self.eat(&Tok::Assign) {
                        let neg = self.eat(&Tok::Minus);
                        next = match self.peek() {
                            Some(Tok::Number(n)) => {
                                n.parse::<i64>().map_err(|_| self.error("integer"))?
                            }
                            _ => return Err(self.error("integer")),
                        };
                        if neg {
                            next = -next;
                        }
                        self.pos += 1;
                    }
                    variants.push((v, next));
                    next += 1;
                    if !self.eat(&Tok::Comma) {
                        self.expect(Tok::RBrace)?;
                        break;
                    }
                }
                self.eat(&Tok::Semi);
                Ok(Item::Enum(EnumDecl {
                    name,
                    variants,
                    span: start.to(self.prev_span()),
                }))
            }
            Some(_) => {
                let ty = self.ty()?;
                let first = self.ident()?;
                if self.eat(&Tok::ColonColon) {
                    let method = self.ident()?;
                    let f =
                        self.function_rest(ty, format!("{first}::{method}"), Some(first), start)?;
                    return Ok(Item::Function(f));
                }
                if self.peek() == Some(&Tok::LParen) {
                    return Ok(Item::Function(self.function_rest(ty, first, None, start)?));
                }
                let ty = self.array_suffix(ty)?;
                let init = if self.eat(&Tok::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                Ok(Item::Global(VarDecl {
                    ty,
                    name: first,
                    init,
                    span: start.to(self.prev_span()),
                }))
            }
            None => Err(self.error("item")),
        }
    }

    fn field_block(&mut self, class: Option<&str>) -> PResult<Vec<FieldDecl>> {
        self.expect(Tok::LBrace)?;
        let mut fields = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let start = self.span();
            let ty = self.ty()?;
            let name = self.ident()?;
            if let (Some(class), Some(Tok::LParen)) = (class, self.peek()) {
                let qualified = format!("{class}::{name}");
                // declaration only, or inline definition
                let save = self.pos;
                self.params()?;
                if self.eat(&Tok::Semi) {
                    continue;
                }
                self.pos = save;
                let f = self.function_rest(ty, qualified, Some(class.to_string()), start)?;
                self.pending.push(f);
                continue;
            }
            let ty = self.array_suffix(ty)?;
            self.expect(Tok::Semi)?;
            fields.push(FieldDecl {
                ty,
                name,
                span: start.to(self.prev_span()),
            });
        }
        Ok(fields)
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(params);
        }
        if self.peek() == Some(&Tok::Void) && self.peek_at(1) == Some(&Tok::RParen) {
            self.pos += 2;
            return Ok(params);
        }
        loop {
            let start = self.span();
            let ty = self.ty()?;
            let name = self.ident()?;
            let ty = self.array_suffix(ty)?;
            params.push(Param {
                ty,
                name,
                span: start.to(self.prev_span()),
            });
            if self.eat(&Tok::RParen) {
                return Ok(params);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn function_rest(
        &mut self,
        ret: TypeRef,
        name: String,
        class: Option<String>,
        start: Span,
    ) -> PResult<FunctionDef> {
        let params = self.params()?;
        let body = self.block()?;
        Ok(FunctionDef {
            name,
            class,
            params,
            ret,
            body,
            span: start.to(self.prev_span()),
        })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.at_end() {
                return Err(self.error("`}`"));
            }
            self.stmt_into(&mut out)?;
        }
        Ok(out)
    }

    /// A braced block or a single statement.
    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.peek() == Some(&Tok::LBrace) {
            self.block()
        } else {
            let mut out = Vec::new();
            self.stmt_into(&mut out)?;
            Ok(out)
        }
    }

    fn looks_like_decl(&self) -> bool {
        if self.starts_type() {
            return true;
        }
        match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Ident(_)), Some(Tok::Ident(_))) => true,
            (Some(Tok::Ident(_)), Some(Tok::Amp)) => true,
            (Some(Tok::Ident(_)), Some(Tok::LBracket)) => self.peek_at(2) == Some(&Tok::RBracket),
            _ => false,
        }
    }

    fn stmt_into(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        let start = self.span();
        let kind = match self.peek() {
            Some(Tok::LBrace) => {
                out.extend(self.block()?);
                return Ok(());
            }
            Some(Tok::If) => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let then_b = self.body()?;
                let else_b = if self.eat(&Tok::Else) {
                    self.body()?
                } else {
                    Vec::new()
                };
                StmtKind::If(cond, then_b, else_b)
            }
            Some(Tok::While) => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                StmtKind::While(cond, self.body()?)
            }
            Some(Tok::Switch) => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                let scrutinee = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::LBrace)?;
                let mut cases = Vec::new();
                while !self.eat(&Tok::RBrace) {
                    let cstart = self.span();
                    let label = if self.eat(&Tok::Case) {
                        Some(self.expr()?)
                    } else if self.eat(&Tok::Default) {
                        None
                    } else {
                        return Err(self.error("`case` or `default`"));
                    };
                    self.expect(Tok::Colon)?;
                    let mut body = Vec::new();
                    while !matches!(
                        self.peek(),
                        Some(Tok::Case | Tok::Default | Tok::RBrace) | None
                    ) {
                        self.stmt_into(&mut body)?;
                    }
                    cases.push(SwitchCase {
                        label,
                        body,
                        span: cstart.to(self.prev_span()),
                    });
                }
                StmtKind::Switch(scrutinee, cases)
            }
            Some(Tok::Return) => {
                self.pos += 1;
                let value = if self.peek() == Some(&Tok::Semi) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi)?;
                StmtKind::Return(value)
            }
            Some(Tok::Break) => {
                self.pos += 1;
                self.expect(Tok::Semi)?;
                StmtKind::Break
            }
            _ if self.looks_like_decl() => {
                let ty = self.ty()?;
                let name = self.ident()?;
                let ty = self.array_suffix(ty)?;
                let init = if self.eat(&Tok::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                StmtKind::VarDecl(VarDecl {
                    ty,
                    name,
                    init,
                    span: start.to(self.prev_span()),
                })
            }
            _ => {
                let lhs = self.expr()?;
                if self.eat(&Tok::Assign) {
                    if !lhs.is_lvalue() {
                        return Err(FrontendError::Parse {
                            file: self.file,
                            line: lhs.span.line,
                            col: lhs.span.col,
                            message: "left side of `=` is not assignable".into(),
                        });
                    }
                    let rhs = self.expr()?;
                    self.expect(Tok::Semi)?;
                    StmtKind::Assign(lhs, rhs)
                } else {
                    if !matches!(lhs.kind, ExprKind::Call(..)) {
                        return Err(FrontendError::Parse {
                            file: self.file,
                            line: lhs.span.line,
                            col: lhs.span.col,
                            message: "expression statement must be a call".into(),
                        });
                    }
                    self.expect(Tok::Semi)?;
                    StmtKind::Expr(lhs)
                }
            }
        };
        out.push(Stmt {
            kind,
            span: start.to(self.prev_span()),
        });
        Ok(())
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek()? {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Gt => BinOp::Gt,
            Tok::Le => BinOp::Le,
            Tok::Ge => BinOp::Ge,
            Tok::AndAnd => BinOp::And,
            Tok::OrOr => BinOp::Or,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = self.mk(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.eat(&Tok::Minus) {
            let inner = self.unary()?;
            let span = start.to(inner.span);
            return Ok(self.mk(ExprKind::Neg(Box::new(inner)), span));
        }
        if self.eat(&Tok::Bang) {
            let inner = self.unary()?;
            let span = start.to(inner.span);
            return Ok(self.mk(ExprKind::Not(Box::new(inner)), span));
        }
        self.postfix()
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat(&Tok::Dot) {
                let name = self.ident()?;
                if self.peek() == Some(&Tok::LParen) {
                    let args = self.args()?;
                    let span = e.span.to(self.prev_span());
                    e = self.mk(
                        ExprKind::Call(Callee::Method(Box::new(e), name), args),
                        span,
                    );
                } else {
                    let span = e.span.to(self.prev_span());
                    e = self.mk(ExprKind::Member(Box::new(e), name), span);
                }
            } else if self.eat(&Tok::LBracket) {
                let idx = self.expr()?;
                self.expect(Tok::RBracket)?;
                let span = e.span.to(self.prev_span());
                e = self.mk(ExprKind::Index(Box::new(e), Box::new(idx)), span);
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().cloned() {
            Some(Tok::Number(n)) => {
                self.pos += 1;
                Ok(self.mk(ExprKind::Number(n), start))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(self.mk(ExprKind::Str(s), start))
            }
            Some(Tok::Ident(mut name)) => {
                self.pos += 1;
                while self.peek() == Some(&Tok::ColonColon) {
                    self.pos += 1;
                    name = format!("{name}::{}", self.ident()?);
                }
                if self.peek() == Some(&Tok::LParen) {
                    let args = self.args()?;
                    let span = start.to(self.prev_span());
                    Ok(self.mk(ExprKind::Call(Callee::Name(name), args), span))
                } else {
                    Ok(self.mk(ExprKind::Var(name), start))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => Err(self.error("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::lexer::tokenize;
    use super::*;

    fn parse(src: &str) -> Program {
        parse_program(&tokenize(src).unwrap()).unwrap()
    }

    #[test]
    fn empty_input() {
        assert!(parse("").items.is_empty());
    }

    #[test]
    fn closest_z_shape() {
        let p = parse(
            "float closest_z(location_t l, location_t ol, velocity_t v, velocity_t ov, u32 time) {
                float delta_vel_d = ov.z - v.z;
                float delta_pos_d = ol.z - l.z;
                return fabsf(delta_pos_d - delta_vel_d * time) / 100.0f;
            }",
        );
        let f = p.function("closest_z").unwrap();
        assert_eq!(f.params.len(), 5);
        assert_eq!(f.body.len(), 3);
        let StmtKind::Return(Some(ret)) = &f.body[2].kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::Div, lhs, _) = &ret.kind else {
            panic!("{ret:?}")
        };
        let ExprKind::Call(Callee::Name(n), args) = &lhs.kind else {
            panic!()
        };
        assert_eq!(n, "fabsf");
        let ExprKind::Binary(BinOp::Sub, _, rhs) = &args[0].kind else {
            panic!()
        };
        assert!(matches!(rhs.kind, ExprKind::Binary(BinOp::Mul, _, _)));
    }

    #[test]
    fn patched_guard_shape() {
        let p = parse(
            r#"void handle_obstacle_distance_msg(const mavlink_obstacle_distance_t &msg) {
                if (msg.frame != MAV_FRAME_BODY_FRD) {
                    log("Unsupported frame");
                    return;
                }
                set_obstacle_boundary(msg.angle, msg.distance / 100.0);
            }"#,
        );
        let f = p.functions().next().unwrap();
        let StmtKind::If(cond, then_b, else_b) = &f.body[0].kind else {
            panic!()
        };
        assert!(matches!(cond.kind, ExprKind::Binary(BinOp::Ne, _, _)));
        assert!(matches!(then_b[0].kind, StmtKind::Expr(_)));
        assert!(matches!(then_b[1].kind, StmtKind::Return(None)));
        assert!(else_b.is_empty());
    }

    #[test]
    fn classes_methods_enums_switch() {
        let p = parse(
            "enum MAV_FRAME { LOCAL, GLOBAL = 4, BODY }
             class Corr { int link_offset; int correct_time(int rmt, int lcl); int twice(int a) { return a + a; } };
             Corr corrector;
             int Corr::correct_time(int rmt, int lcl) { return rmt; }
             void f(int x) { switch (x) { case LOCAL: g(); break; default: h(); } while (x > 1) { x = x - 1; } }",
        );
        let e = p.enums().next().unwrap();
        assert_eq!(
            e.variants,
            vec![
                ("LOCAL".into(), 0),
                ("GLOBAL".into(), 4),
                ("BODY".into(), 5)
            ]
        );
        assert!(p.function("Corr::correct_time").is_some());
        assert!(p.function("Corr::twice").is_some());
        assert_eq!(p.classes().next().unwrap().fields.len(), 1);
    }

    #[test]
    fn precedence() {
        let p = parse("void f() { x = a + b * c == d && !e || g; }");
        let StmtKind::Assign(_, rhs) = &p.functions().next().unwrap().body[0].kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::Or, l, _) = &rhs.kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::And, l, _) = &l.kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::Eq, l, _) = &l.kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::Add, _, r) = &l.kind else {
            panic!()
        };
        assert!(matches!(r.kind, ExprKind::Binary(BinOp::Mul, _, _)));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_program(&tokenize("void f() {\n  x = ;\n}").unwrap()).unwrap_err();
        match err {
            FrontendError::Parse { line, col, .. } => assert_eq!((line, col), (2, 7)),
            other => panic!("{other:?}"),
        }
        assert!(parse_program(&tokenize("void f() { 1 + 2; }").unwrap()).is_err());
        assert!(parse_program(&tokenize("void f() { f() = 2; }").unwrap()).is_err());
    }

    #[test]
    fn child_spans_nest() {
        let p = parse("float g(float a) { return (a - 2.0) * a / 3.0; }");
        let f = p.functions().next().unwrap();
        let StmtKind::Return(Some(e)) = &f.body[0].kind else {
            panic!()
        };
        assert!(f.span.contains(&f.body[0].span));
        assert!(f.body[0].span.contains(&e.span));
        e.walk(&mut |parent| {
            if let ExprKind::Binary(_, a, b) = &parent.kind {
                assert!(parent.span.contains(&a.span) && parent.span.contains(&b.span));
            }
        });
    }
}
