//! Name resolution and canonical variable identities.
//!
//! Globals keep their name, struct members become `StructType.field`
//! whatever path reaches them, class fields become `Class::field`, and
//! locals and parameters become `function::name`. Index accesses resolve
//! to the array itself.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::ast::*;
use super::FrontendError;

/// Dense bijection between canonical names and ids, in first-encounter order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarRegistry {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl VarRegistry {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u32, n.as_str()))
    }
}

/// What a variable-like expression refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Var {
        name: String,
        local: bool,
        /// Parameter position, for parameters.
        param: Option<usize>,
    },
    Member {
        name: String,
        struct_ty: String,
        field: String,
    },
    EnumConst {
        enum_name: String,
        variant: String,
        value: i64,
    },
}

impl Resolved {
    pub fn canonical(&self) -> Option<&str> {
        match self {
            Resolved::Var { name, .. } | Resolved::Member { name, .. } => Some(name),
            Resolved::EnumConst { .. } => None,
        }
    }
}

/// Side tables produced by [`canonicalize`], keyed by expression id.
#[derive(Debug, Clone, Default)]
pub struct Canonical {
    pub registry: VarRegistry,
    pub non_local: BTreeSet<String>,
    /// Variables whose declared type is an enum.
    pub enum_vars: BTreeSet<String>,
    pub resolved: HashMap<ExprId, Resolved>,
    /// Static types of variable, member, index and call expressions.
    pub types: HashMap<ExprId, TypeRef>,
    /// Qualified callee name per call expression; may name an undefined
    /// (external) function.
    pub calls: HashMap<ExprId, String>,
    pub var_types: BTreeMap<String, TypeRef>,
    pub enum_values: BTreeMap<String, (String, i64)>,
    /// Parameter canonical names per function.
    pub params: BTreeMap<String, Vec<String>>,
}

impl Canonical {
    pub fn name_of(&self, id: ExprId) -> Option<&str> {
        self.resolved.get(&id).and_then(Resolved::canonical)
    }

    pub fn is_non_local(&self, name: &str) -> bool {
        self.non_local.contains(name)
    }

    pub fn callee(&self, id: ExprId) -> Option<&str> {
        self.calls.get(&id).map(String::as_str)
    }
}

struct Scope<'p> {
    func: &'p FunctionDef,
    locals: HashMap<String, TypeRef>,
}

struct Ctx<'p> {
    program: &'p Program,
    structs: HashMap<&'p str, &'p StructDecl>,
    classes: HashMap<&'p str, &'p ClassDecl>,
    enums: HashSet<&'p str>,
    functions: HashMap<&'p str, &'p FunctionDef>,
    globals: HashMap<&'p str, &'p TypeRef>,
    out: Canonical,
}

fn invalid(span: Span, message: String) -> FrontendError {
    FrontendError::Invalid {
        file: span.file,
        line: span.line,
        col: span.col,
        message,
    }
}

fn unresolved(span: Span, name: &str) -> FrontendError {
    FrontendError::UnresolvedName {
        file: span.file,
        line: span.line,
        col: span.col,
        name: name.to_string(),
    }
}

pub fn canonicalize(program: &Program) -> Result<Canonical, FrontendError> {
    let mut cx = Ctx {
        program,
        structs: HashMap::new(),
        classes: HashMap::new(),
        enums: HashSet::new(),
        functions: HashMap::new(),
        globals: HashMap::new(),
        out: Canonical::default(),
    };
    cx.declare()?;
    cx.check_types()?;
    for item in &program.items {
        match item {
            Item::Global(g) => {
                cx.out.registry.intern(&g.name);
                if let Some(init) = &g.init {
                    cx.expr(init, None)?;
                }
            }
            Item::Function(f) => cx.function(f)?,
            _ => {}
        }
    }
    Ok(cx.out)
}

impl<'p> Ctx<'p> {
    fn declare(&mut self) -> Result<(), FrontendError> {
        let mut type_names: HashSet<&str> = HashSet::new();
        for item in &self.program.items {
            match item {
                Item::Struct(s) => {
                    if !type_names.insert(&s.name) {
                        return Err(invalid(s.span, format!("duplicate type `{}`", s.name)));
                    }
                    self.structs.insert(&s.name, s);
                }
                Item::Class(c) => {
                    if !type_names.insert(&c.name) {
                        return Err(invalid(c.span, format!("duplicate type `{}`", c.name)));
                    }
                    self.classes.insert(&c.name, c);
                }
                Item::Enum(e) => {
                    if !type_names.insert(&e.name) {
                        return Err(invalid(e.span, format!("duplicate type `{}`", e.name)));
                    }
                    self.enums.insert(&e.name);
                    for (v, value) in &e.variants {
                        if self
                            .out
                            .enum_values
                            .insert(v.clone(), (e.name.clone(), *value))
                            .is_some()
                        {
                            return Err(invalid(e.span, format!("duplicate enum constant `{v}`")));
                        }
                    }
                }
                Item::Function(f) => {
                    if self.functions.insert(&f.name, f).is_some() {
                        return Err(invalid(f.span, format!("duplicate function `{}`", f.name)));
                    }
                    let mut seen = HashSet::new();
                    for p in &f.params {
                        if !seen.insert(&p.name) {
                            return Err(invalid(
                                p.span,
                                format!("duplicate parameter `{}`", p.name),
                            ));
                        }
                    }
                }
                Item::Global(g) => {
                    if self.globals.insert(&g.name, &g.ty).is_some() {
                        return Err(invalid(g.span, format!("duplicate global `{}`", g.name)));
                    }
                }
                Item::Include(..) => {}
            }
        }
        Ok(())
    }

    fn type_ok(&self, ty: &TypeRef) -> bool {
        match ty {
            TypeRef::Named(n) => {
                self.structs.contains_key(n.as_str())
                    || self.classes.contains_key(n.as_str())
                    || self.enums.contains(n.as_str())
            }
            TypeRef::Array(t) => self.type_ok(t),
            _ => true,
        }
    }

    fn require_type(&self, ty: &TypeRef, span: Span) -> Result<(), FrontendError> {
        if self.type_ok(ty) {
            Ok(())
        } else {
            Err(invalid(span, format!("unknown type `{ty}`")))
        }
    }

    fn check_types(&mut self) -> Result<(), FrontendError> {
        for item in &self.program.items {
            match item {
                Item::Struct(StructDecl { name, fields, .. }) => {
                    for f in fields {
                        self.require_type(&f.ty, f.span)?;
                        let canon = format!("{name}.{}", f.name);
                        self.note_var(&canon, &f.ty, false);
                    }
                }
                Item::Class(ClassDecl { name, fields, .. }) => {
                    for f in fields {
                        self.require_type(&f.ty, f.span)?;
                        let canon = format!("{name}::{}", f.name);
                        self.note_var(&canon, &f.ty, false);
                    }
                }
                Item::Global(g) => {
                    self.require_type(&g.ty, g.span)?;
                    self.note_var(&g.name, &g.ty, false);
                }
                Item::Function(f) => {
                    self.require_type(&f.ret, f.span)?;
                    if let Some(class) = &f.class {
                        if !self.classes.contains_key(class.as_str()) {
                            return Err(invalid(f.span, format!("unknown class `{class}`")));
                        }
                    }
                    for p in &f.params {
                        self.require_type(&p.ty, p.span)?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn note_var(&mut self, canon: &str, ty: &TypeRef, local: bool) {
        self.out.var_types.insert(canon.to_string(), ty.clone());
        if !local {
            self.out.non_local.insert(canon.to_string());
        }
        if self.is_enum_type(ty) {
            self.out.enum_vars.insert(canon.to_string());
        }
    }

    fn is_enum_type(&self, ty: &TypeRef) -> bool {
        match ty {
            TypeRef::Named(n) => self.enums.contains(n.as_str()),
            TypeRef::Array(t) => self.is_enum_type(t),
            _ => false,
        }
    }

    fn function(&mut self, f: &'p FunctionDef) -> Result<(), FrontendError> {
        let mut scope = Scope {
            func: f,
            locals: HashMap::new(),
        };
        let mut params = Vec::new();
        for p in &f.params {
            let canon = format!("{}::{}", f.name, p.name);
            scope.locals.insert(p.name.clone(), p.ty.clone());
            self.note_var(&canon, &p.ty, true);
            self.out.registry.intern(&canon);
            params.push(canon);
        }
        self.out.params.insert(f.name.clone(), params);
        self.block(&f.body, &mut scope)
    }

    fn block(&mut self, body: &'p [Stmt], scope: &mut Scope<'p>) -> Result<(), FrontendError> {
        for s in body {
            self.stmt(s, scope)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &'p Stmt, scope: &mut Scope<'p>) -> Result<(), FrontendError> {
        match &s.kind {
            StmtKind::VarDecl(d) => {
                self.require_type(&d.ty, d.span)?;
                if let Some(init) = &d.init {
                    self.expr(init, Some(scope))?;
                }
                let canon = format!("{}::{}", scope.func.name, d.name);
                scope.locals.insert(d.name.clone(), d.ty.clone());
                self.note_var(&canon, &d.ty, true);
                self.out.registry.intern(&canon);
            }
            StmtKind::Assign(l, r) => {
                self.expr(l, Some(scope))?;
                self.expr(r, Some(scope))?;
            }
            StmtKind::If(c, t, e) => {
                self.expr(c, Some(scope))?;
                self.block(t, scope)?;
                self.block(e, scope)?;
            }
            StmtKind::Switch(x, cases) => {
                self.expr(x, Some(scope))?;
                for case in cases {
                    if let Some(l) = &case.label {
                        self.expr(l, Some(scope))?;
                    }
                    self.block(&case.body, scope)?;
                }
            }
            StmtKind::While(c, b) => {
                self.expr(c, Some(scope))?;
                self.block(b, scope)?;
            }
            StmtKind::Return(Some(e)) | StmtKind::Expr(e) => {
                self.expr(e, Some(scope))?;
            }
            StmtKind::Return(None) | StmtKind::Break => {}
        }
        Ok(())
    }

    fn resolve_var(
        &mut self,
        name: &str,
        span: Span,
        scope: Option<&Scope<'p>>,
    ) -> Result<(Resolved, Option<TypeRef>), FrontendError> {
        if let Some(scope) = scope {
            if let Some(ty) = scope.locals.get(name) {
                let param = scope.func.params.iter().position(|p| p.name == name);
                let canon = format!("{}::{}", scope.func.name, name);
                return Ok((
                    Resolved::Var {
                        name: canon,
                        local: true,
                        param,
                    },
                    Some(ty.clone()),
                ));
            }
            if let Some(class) = scope.func.class.as_deref() {
                if let Some(r) = self.class_field(class, name) {
                    return Ok(r);
                }
            }
        }
        if let Some((class, field)) = name.split_once("::") {
            if let Some(r) = self.class_field(class, field) {
                return Ok(r);
            }
        }
        if let Some(ty) = self.globals.get(name) {
            let ty = (*ty).clone();
            return Ok((
                Resolved::Var {
                    name: name.to_string(),
                    local: false,
                    param: None,
                },
                Some(ty),
            ));
        }
        if let Some((enum_name, value)) = self.out.enum_values.get(name) {
            let r = Resolved::EnumConst {
                enum_name: enum_name.clone(),
                variant: name.to_string(),
                value: *value,
            };
            return Ok((r, Some(TypeRef::Named(enum_name.clone()))));
        }
        Err(unresolved(span, name))
    }

    fn class_field(&self, class: &str, field: &str) -> Option<(Resolved, Option<TypeRef>)> {
        let decl = self.classes.get(class)?;
        let f = decl.fields.iter().find(|f| f.name == field)?;
        let canon = format!("{class}::{field}");
        Some((
            Resolved::Var {
                name: canon,
                local: false,
                param: None,
            },
            Some(f.ty.clone()),
        ))
    }

    fn member(
        &self,
        base_ty: Option<&TypeRef>,
        field: &str,
        span: Span,
    ) -> Result<(Resolved, TypeRef), FrontendError> {
        let Some(TypeRef::Named(ty)) = base_ty else {
            return Err(unresolved(span, field));
        };
        if let Some(s) = self.structs.get(ty.as_str()) {
            if let Some(f) = s.fields.iter().find(|f| f.name == field) {
                let r = Resolved::Member {
                    name: format!("{ty}.{field}"),
                    struct_ty: ty.clone(),
                    field: field.to_string(),
                };
                return Ok((r, f.ty.clone()));
            }
        }
        if let Some((r, Some(t))) = self.class_field(ty, field) {
            return Ok((r, t));
        }
        Err(unresolved(span, &format!("{ty}.{field}")))
    }

    fn expr(
        &mut self,
        e: &'p Expr,
        scope: Option<&Scope<'p>>,
    ) -> Result<Option<TypeRef>, FrontendError> {
        let ty = match &e.kind {
            ExprKind::Number(_) | ExprKind::Str(_) => return Ok(None),
            ExprKind::Var(name) => {
                let (r, ty) = self.resolve_var(name, e.span, scope)?;
                if let Some(c) = r.canonical() {
                    self.out.registry.intern(c);
                }
                self.out.resolved.insert(e.id, r);
                ty
            }
            ExprKind::Member(base, field) => {
                let bt = self.expr(base, scope)?;
                let (r, ty) = self.member(bt.as_ref(), field, e.span)?;
                if let Some(c) = r.canonical() {
                    self.out.registry.intern(c);
                }
                self.out.resolved.insert(e.id, r);
                Some(ty)
            }
            ExprKind::Index(base, idx) => {
                let bt = self.expr(base, scope)?;
                self.expr(idx, scope)?;
                if let Some(r) = self.out.resolved.get(&base.id).cloned() {
                    self.out.resolved.insert(e.id, r);
                }
                match bt {
                    Some(TypeRef::Array(t)) => Some(*t),
                    other => other,
                }
            }
            ExprKind::Neg(a) | ExprKind::Not(a) => {
                self.expr(a, scope)?;
                return Ok(None);
            }
            ExprKind::Binary(_, a, b) => {
                self.expr(a, scope)?;
                self.expr(b, scope)?;
                return Ok(None);
            }
            ExprKind::Call(callee, args) => {
                let target = match callee {
                    Callee::Name(n) => {
                        let in_class = scope
                            .and_then(|s| s.func.class.as_deref())
                            .map(|c| format!("{c}::{n}"))
                            .filter(|q| self.functions.contains_key(q.as_str()));
                        in_class.unwrap_or_else(|| n.clone())
                    }
                    Callee::Method(recv, m) => match self.expr(recv, scope)? {
                        Some(TypeRef::Named(c)) => format!("{c}::{m}"),
                        _ => return Err(unresolved(e.span, m)),
                    },
                };
                for a in args {
                    self.expr(a, scope)?;
                }
                let ret = self.functions.get(target.as_str()).map(|f| f.ret.clone());
                self.out.calls.insert(e.id, target);
                ret
            }
        };
        if let Some(t) = &ty {
            self.out.types.insert(e.id, t.clone());
        }
        Ok(ty)
    }
}
