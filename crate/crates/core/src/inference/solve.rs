//! Incremental solver. Constraints are added one at a time in generation
//! order; each addition propagates to a fixpoint, so a conflict is reported
//! at the constraint that first makes the system unsatisfiable.
//!
//! Dimensions live in a union-find merged by every constraint kind, with
//! product and quotient relations solved as their operands become known.
//! Frames live in a second union-find merged by equality only; each class
//! holds an optional exact frame and a lower bound raised along subtype and
//! product edges.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::units::{frame_join, frame_meet, Dimension, FrameSpec, UnitType};

use super::{Code, Constraint, ConstraintKind, ConstraintSet, Diagnostic, Severity, Term};

/// Outcome of solving one constraint set.
#[derive(Debug, Clone, Default)]
pub struct Solution {
    pub diagnostics: Vec<Diagnostic>,
    /// Resolved types of named variables, argument and return types whose
    /// dimension is known. The frame is the exact frame, else the lower
    /// bound, else `Any`.
    pub model: BTreeMap<String, UnitType>,
}

#[derive(Debug, Clone, Copy)]
struct Prov {
    cid: usize,
    from: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Rel {
    mul: bool,
    r: usize,
    a: usize,
    b: usize,
    cid: usize,
}

enum Val {
    Poly,
    Bottom,
    F(FrameSpec),
}

struct Solver<'s> {
    set: &'s ConstraintSet,
    atoms: HashMap<Term, usize>,
    rels: Vec<Rel>,
    // dimensions
    dparent: Vec<usize>,
    dim: Vec<Option<(Dimension, usize)>>,
    drels: Vec<Vec<usize>>,
    /// Classes already involved in a reported dimension conflict.
    poisoned: Vec<bool>,
    dqueue: VecDeque<usize>,
    // frames
    fparent: Vec<usize>,
    exact: Vec<Option<(FrameSpec, usize)>>,
    lb: Vec<Option<(FrameSpec, Prov)>>,
    poly: Vec<bool>,
    out: Vec<Vec<(usize, usize)>>,
    meets: Vec<Vec<usize>>,
    samedims: Vec<Vec<(usize, usize)>>,
    violated: Vec<bool>,
    fqueue: VecDeque<usize>,
    reported: HashSet<(usize, usize, usize)>,
    // current constraint
    cur: usize,
    ends: (usize, usize),
    diags: Vec<Diagnostic>,
}

pub fn solve(set: &ConstraintSet) -> Solution {
    let mut s = Solver {
        set,
        atoms: HashMap::new(),
        rels: Vec::new(),
        dparent: Vec::new(),
        dim: Vec::new(),
        drels: Vec::new(),
        poisoned: Vec::new(),
        dqueue: VecDeque::new(),
        fparent: Vec::new(),
        exact: Vec::new(),
        lb: Vec::new(),
        poly: Vec::new(),
        out: Vec::new(),
        meets: Vec::new(),
        samedims: Vec::new(),
        violated: Vec::new(),
        fqueue: VecDeque::new(),
        reported: HashSet::new(),
        cur: 0,
        ends: (0, 0),
        diags: Vec::new(),
    };
    for (cid, c) in set.constraints.iter().enumerate() {
        s.add(cid, c);
    }
    let model = s.model();
    Solution {
        diagnostics: s.diags,
        model,
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl<'s> Solver<'s> {
    fn new_node(&mut self, poly: bool) -> usize {
        let n = self.dparent.len();
        self.dparent.push(n);
        self.dim.push(None);
        self.drels.push(Vec::new());
        self.poisoned.push(false);
        self.fparent.push(n);
        self.exact.push(None);
        self.lb.push(None);
        self.poly.push(poly);
        self.out.push(Vec::new());
        self.meets.push(Vec::new());
        self.samedims.push(Vec::new());
        self.violated.push(false);
        n
    }

    fn dfind(&mut self, x: usize) -> usize {
        find(&mut self.dparent, x)
    }

    fn ffind(&mut self, x: usize) -> usize {
        find(&mut self.fparent, x)
    }

    fn node(&mut self, t: &Term, cid: usize) -> usize {
        match t {
            Term::Var(_) | Term::ArgType(..) | Term::ReturnType(_) => {
                if let Some(&n) = self.atoms.get(t) {
                    return n;
                }
                let poly = matches!(t, Term::Var(v) if self.set.poly_vars.contains(v));
                let n = self.new_node(poly);
                self.atoms.insert(t.clone(), n);
                n
            }
            Term::Known(u) => {
                let n = self.new_node(false);
                self.dim[n] = Some((u.dimension(), cid));
                self.exact[n] = Some((u.frame.clone(), cid));
                n
            }
            Term::Lit(d) => {
                let n = self.new_node(true);
                self.dim[n] = Some((*d, cid));
                n
            }
            Term::Product(a, b) | Term::Quotient(a, b) => {
                let na = self.node(a, cid);
                let nb = self.node(b, cid);
                let (fa, fb) = (self.ffind(na), self.ffind(nb));
                let r = self.new_node(self.poly[fa] && self.poly[fb]);
                let id = self.rels.len();
                self.rels.push(Rel {
                    mul: matches!(t, Term::Product(..)),
                    r,
                    a: na,
                    b: nb,
                    cid,
                });
                for n in [na, nb, r] {
                    let d = self.dfind(n);
                    self.drels[d].push(id);
                }
                self.meets[fa].push(id);
                if fb != fa {
                    self.meets[fb].push(id);
                }
                self.dqueue.push_back(id);
                self.fqueue.push_back(fa);
                self.fqueue.push_back(fb);
                r
            }
        }
    }

    fn add(&mut self, cid: usize, c: &Constraint) {
        self.cur = cid;
        let l = self.node(&c.left, cid);
        let r = self.node(&c.right, cid);
        self.ends = (l, r);
        self.dim_union(l, r);
        match c.kind {
            ConstraintKind::Equal => self.frame_union(l, r),
            ConstraintKind::Subtype => {
                let fl = self.ffind(l);
                self.out[fl].push((r, cid));
                self.fqueue.push_back(fl);
            }
            ConstraintKind::SameDimension => {
                let (fl, fr) = (self.ffind(l), self.ffind(r));
                self.samedims[fl].push((r, cid));
                self.samedims[fr].push((l, cid));
                self.check_comparable(l, r, cid);
            }
        }
        self.run_dims();
        self.run_frames();
    }

    // ---- dimensions ----

    fn dim_union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.dfind(a), self.dfind(b));
        if ra == rb {
            return;
        }
        if let (Some((da, _)), Some((db, _))) = (self.dim[ra], self.dim[rb]) {
            if da != db {
                if !self.poisoned[ra] && !self.poisoned[rb] {
                    self.report_dim(a, b, da, db);
                }
                self.poisoned[ra] = true;
            }
        }
        self.poisoned[ra] = self.poisoned[ra] || self.poisoned[rb];
        self.dparent[rb] = ra;
        if self.dim[ra].is_none() {
            self.dim[ra] = self.dim[rb];
        }
        let moved = std::mem::take(&mut self.drels[rb]);
        self.drels[ra].extend(moved);
        let rels = self.drels[ra].clone();
        self.dqueue.extend(rels);
    }

    fn set_dim(&mut self, n: usize, d: Dimension, cid: usize) {
        let root = self.dfind(n);
        match self.dim[root] {
            None => {
                self.dim[root] = Some((d, cid));
                let rels = self.drels[root].clone();
                self.dqueue.extend(rels);
            }
            Some((have, _)) if have != d => {
                if !self.poisoned[root] {
                    self.report_dim_at(n, have, d);
                }
                self.poisoned[root] = true;
            }
            _ => {}
        }
    }

    fn run_dims(&mut self) {
        while let Some(id) = self.dqueue.pop_front() {
            let rel = self.rels[id];
            let (ra, rb, rr) = (self.dfind(rel.a), self.dfind(rel.b), self.dfind(rel.r));
            let (da, db, dr) = (
                self.dim[ra].map(|x| x.0),
                self.dim[rb].map(|x| x.0),
                self.dim[rr].map(|x| x.0),
            );
            if rel.mul {
                match (da, db, dr) {
                    (Some(a), Some(b), _) => self.set_dim(rel.r, a.mul(&b), rel.cid),
                    (Some(a), None, Some(r)) => self.set_dim(rel.b, r.div(&a), rel.cid),
                    (None, Some(b), Some(r)) => self.set_dim(rel.a, r.div(&b), rel.cid),
                    _ => {}
                }
            } else {
                match (da, db, dr) {
                    (Some(a), Some(b), _) => self.set_dim(rel.r, a.div(&b), rel.cid),
                    (Some(a), None, Some(r)) => self.set_dim(rel.b, a.div(&r), rel.cid),
                    (None, Some(b), Some(r)) => self.set_dim(rel.a, r.mul(&b), rel.cid),
                    _ => {}
                }
            }
        }
    }

    fn report_dim(&mut self, a: usize, b: usize, da: Dimension, db: Dimension) {
        let (ra, rb) = (self.dfind(a), self.dfind(b));
        let key = (self.cur, ra.min(rb), ra.max(rb));
        if !self.reported.insert(key) {
            return;
        }
        let mut chain = vec![self.cur];
        for r in [ra, rb] {
            if let Some((_, src)) = self.dim[r] {
                chain.push(src);
            }
        }
        let left = da.with_frame(self.frame_value(a));
        let right = db.with_frame(self.frame_value(b));
        let c = &self.set.constraints[self.cur];
        let code = if c.left.mentions_signature() || c.right.mentions_signature() {
            Code::Signature
        } else {
            Code::Dimension
        };
        let message = format!("dimension mismatch: {da} vs {db}");
        self.emit(code, message, left, right, chain, None);
    }

    fn report_dim_at(&mut self, n: usize, have: Dimension, derived: Dimension) {
        let root = self.dfind(n);
        let src = self.dim[root].map(|x| x.1);
        let key = (self.cur, root, usize::MAX);
        if !self.reported.insert(key) {
            return;
        }
        let mut chain = vec![self.cur];
        chain.extend(src);
        let left = derived.with_frame(self.frame_value(n));
        let right = have.with_frame(self.frame_value(n));
        let c = &self.set.constraints[self.cur];
        let code = if c.left.mentions_signature() || c.right.mentions_signature() {
            Code::Signature
        } else {
            Code::Dimension
        };
        let message = format!("dimension mismatch: {derived} vs {have}");
        self.emit(code, message, left, right, chain, None);
    }

    // ---- frames ----

    fn value(&mut self, n: usize) -> Val {
        let r = self.ffind(n);
        if let Some((f, _)) = &self.exact[r] {
            return Val::F(f.clone());
        }
        if let Some((f, _)) = &self.lb[r] {
            return Val::F(f.clone());
        }
        if self.poly[r] {
            Val::Poly
        } else {
            Val::Bottom
        }
    }

    fn frame_value(&mut self, n: usize) -> FrameSpec {
        match self.value(n) {
            Val::F(f) => f,
            _ => FrameSpec::Any,
        }
    }

    fn frame_union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.ffind(a), self.ffind(b));
        if ra == rb {
            return;
        }
        if let (Some((ea, _)), Some((eb, _))) = (self.exact[ra].clone(), self.exact[rb].clone()) {
            if ea != eb {
                self.report_exact(ra, rb, ea, eb);
            }
        }
        self.fparent[rb] = ra;
        if self.exact[ra].is_none() {
            self.exact[ra] = self.exact[rb].take();
        }
        self.lb[ra] = match (self.lb[ra].take(), self.lb[rb].take()) {
            (Some((fa, pa)), Some((fb, pb))) => {
                let p = if fb.is_sub_of(&fa) { pa } else { pb };
                Some((frame_join(&fa, &fb), p))
            }
            (x, y) => x.or(y),
        };
        self.poly[ra] = self.poly[ra] && self.poly[rb];
        self.violated[ra] = self.violated[ra] || self.violated[rb];
        let out = std::mem::take(&mut self.out[rb]);
        self.out[ra].extend(out);
        let meets = std::mem::take(&mut self.meets[rb]);
        self.meets[ra].extend(meets);
        let sd = std::mem::take(&mut self.samedims[rb]);
        self.samedims[ra].extend(sd);
        self.check_bound(ra);
        for (other, cid) in self.samedims[ra].clone() {
            self.check_comparable(ra, other, cid);
        }
        self.fqueue.push_back(ra);
    }

    fn run_frames(&mut self) {
        while let Some(n) = self.fqueue.pop_front() {
            let root = self.ffind(n);
            if let Val::F(f) = self.value(root) {
                for (dst, cid) in self.out[root].clone() {
                    self.raise(
                        dst,
                        &f,
                        Prov {
                            cid,
                            from: Some(root),
                        },
                    );
                }
            }
            for id in self.meets[root].clone() {
                self.meet(id);
            }
        }
    }

    fn raise(&mut self, dst: usize, f: &FrameSpec, prov: Prov) {
        let rd = self.ffind(dst);
        let joined = match &self.lb[rd] {
            Some((old, _)) => frame_join(old, f),
            None => f.clone(),
        };
        if self.lb[rd].as_ref().map(|(old, _)| old) == Some(&joined) {
            return;
        }
        self.lb[rd] = Some((joined, prov));
        self.check_bound(rd);
        if self.exact[rd].is_none() {
            self.fqueue.push_back(rd);
        }
    }

    fn meet(&mut self, id: usize) {
        let rel = self.rels[id];
        let (va, vb) = (self.value(rel.a), self.value(rel.b));
        let (fa, fb) = (self.ffind(rel.a), self.ffind(rel.b));
        let (m, from) = match (va, vb) {
            (Val::Poly, Val::F(f)) => (f, fb),
            (Val::F(f), Val::Poly) => (f, fa),
            (Val::F(x), Val::F(y)) => match frame_meet(&x, &y) {
                Ok(m) => {
                    let from = if m == y && m != x { fb } else { fa };
                    (m, from)
                }
                Err(_) => {
                    self.report_meet(rel, x, y);
                    return;
                }
            },
            _ => return,
        };
        self.raise(
            rel.r,
            &m,
            Prov {
                cid: rel.cid,
                from: Some(from),
            },
        );
    }

    fn check_bound(&mut self, root: usize) {
        if self.violated[root] {
            return;
        }
        let (Some((e, _)), Some((l, _))) = (&self.exact[root], &self.lb[root]) else {
            return;
        };
        if l.is_sub_of(e) {
            return;
        }
        self.violated[root] = true;
        let (e, l) = (e.clone(), l.clone());
        let chain = self.trace(root);
        let direct = {
            let (a, b) = self.ends;
            let (ra, rb) = (self.ffind(a), self.ffind(b));
            root == ra || root == rb
        };
        let d = self.dim_of(root);
        let left = d.with_frame(l.clone());
        let right = d.with_frame(e.clone());
        let message = format!("frame mismatch: value in {l} flows into {e}");
        let c = &self.set.constraints[self.cur];
        let signature = c.left.mentions_signature()
            || c.right.mentions_signature()
            || (!direct && chain.iter().any(|&k| self.mentions_signature(k)));
        let mut code = if signature {
            Code::Signature
        } else {
            Code::Frame
        };
        let reloc = chain
            .iter()
            .rev()
            .copied()
            .find(|&k| self.set.constraints[k].struct_token);
        if reloc.is_some() {
            code = Code::Signature;
        }
        let mut full = vec![self.cur];
        full.extend(chain);
        self.emit(code, message, left, right, full, reloc);
    }

    fn check_comparable(&mut self, a: usize, b: usize, cid: usize) {
        let (ra, rb) = (self.ffind(a), self.ffind(b));
        let (Some((ea, sa)), Some((eb, sb))) = (self.exact[ra].clone(), self.exact[rb].clone())
        else {
            return;
        };
        if ea.is_sub_of(&eb) || eb.is_sub_of(&ea) {
            return;
        }
        if !self.reported.insert((cid, ra.min(rb), ra.max(rb))) {
            return;
        }
        let c = &self.set.constraints[cid];
        let code = if c.left.mentions_signature() || c.right.mentions_signature() {
            Code::Signature
        } else {
            Code::Frame
        };
        let (da, db) = (self.dim_of(ra), self.dim_of(rb));
        let message = format!("incomparable frames: {ea} vs {eb}");
        let mut chain = vec![self.cur];
        for k in [cid, sa, sb] {
            if !chain.contains(&k) {
                chain.push(k);
            }
        }
        self.emit(
            code,
            message,
            da.with_frame(ea),
            db.with_frame(eb),
            chain,
            None,
        );
    }

    fn report_exact(&mut self, ra: usize, rb: usize, ea: FrameSpec, eb: FrameSpec) {
        if !self.reported.insert((self.cur, ra.min(rb), ra.max(rb))) {
            return;
        }
        let sa = self.exact[ra].as_ref().map(|x| x.1);
        let sb = self.exact[rb].as_ref().map(|x| x.1);
        let mut chain = vec![self.cur];
        for k in [sa, sb].into_iter().flatten() {
            if !chain.contains(&k) {
                chain.push(k);
            }
        }
        let c = &self.set.constraints[self.cur];
        let code = if c.left.mentions_signature()
            || c.right.mentions_signature()
            || chain.iter().any(|&k| self.mentions_signature(k))
        {
            Code::Signature
        } else {
            Code::Frame
        };
        let (da, db) = (self.dim_of(ra), self.dim_of(rb));
        let message = format!("frame mismatch: {ea} vs {eb}");
        self.emit(
            code,
            message,
            da.with_frame(ea),
            db.with_frame(eb),
            chain,
            None,
        );
    }

    fn report_meet(&mut self, rel: Rel, x: FrameSpec, y: FrameSpec) {
        let (fa, fb) = (self.ffind(rel.a), self.ffind(rel.b));
        if !self.reported.insert((rel.cid, fa.min(fb), fa.max(fb))) {
            return;
        }
        let c = &self.set.constraints[rel.cid];
        let code = if c.left.mentions_signature() || c.right.mentions_signature() {
            Code::Signature
        } else {
            Code::Frame
        };
        let (da, db) = (self.dim_of(fa), self.dim_of(fb));
        let message = format!("operands in disjoint frames: {x} and {y}");
        let mut chain = vec![self.cur];
        if rel.cid != self.cur {
            chain.push(rel.cid);
        }
        self.emit(
            code,
            message,
            da.with_frame(x),
            db.with_frame(y),
            chain,
            None,
        );
    }

    /// Constraints that carried the lower bound of `root`, back to a seed.
    fn trace(&mut self, root: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        let mut seen = HashSet::new();
        let mut cur = root;
        while seen.insert(cur) {
            let Some((_, prov)) = self.lb[cur].clone() else {
                break;
            };
            if !out.contains(&prov.cid) {
                out.push(prov.cid);
            }
            let Some(from) = prov.from else { break };
            let fr = self.ffind(from);
            if let Some((_, src)) = &self.exact[fr] {
                if !out.contains(src) {
                    out.push(*src);
                }
                break;
            }
            cur = fr;
        }
        if let Some((_, src)) = &self.exact[root] {
            if !out.contains(src) {
                out.push(*src);
            }
        }
        out
    }

    fn mentions_signature(&self, cid: usize) -> bool {
        let c = &self.set.constraints[cid];
        c.left.mentions_signature() || c.right.mentions_signature()
    }

    fn dim_of(&mut self, n: usize) -> Dimension {
        let r = self.dfind(n);
        self.dim[r].map(|x| x.0).unwrap_or_else(Dimension::identity)
    }

    fn emit(
        &mut self,
        code: Code,
        message: String,
        left: UnitType,
        right: UnitType,
        chain: Vec<usize>,
        reloc: Option<usize>,
    ) {
        let at = reloc.unwrap_or(self.cur);
        let span = self.set.constraints[at].span;
        let file = self
            .set
            .files
            .get(span.file as usize)
            .cloned()
            .unwrap_or_default();
        let mut ids: Vec<usize> = Vec::new();
        for k in chain {
            if !ids.contains(&k) {
                ids.push(k);
            }
        }
        if let Some(r) = reloc {
            ids.retain(|&k| k != r);
            ids.insert(0, r);
        }
        let links: Vec<Constraint> = ids
            .iter()
            .map(|&k| self.set.constraints[k].clone())
            .collect();
        self.diags.push(Diagnostic {
            file,
            line: span.line,
            col: span.col,
            severity: Severity::Error,
            code,
            message,
            left_type: left.to_string(),
            right_type: right.to_string(),
            chain: links.iter().map(|c| self.set.render(c)).collect(),
            links,
        });
    }

    fn model(&mut self) -> BTreeMap<String, UnitType> {
        let atoms: Vec<(Term, usize)> = self.atoms.iter().map(|(t, n)| (t.clone(), *n)).collect();
        let mut out = BTreeMap::new();
        for (t, n) in atoms {
            if matches!(t, Term::Var(v) if self.set.var_names.get(v as usize).is_none_or(|x| x.is_none()))
            {
                continue;
            }
            let r = self.dfind(n);
            let Some((d, _)) = self.dim[r] else { continue };
            let f = self.frame_value(n);
            out.insert(self.set.term_string(&t), d.with_frame(f));
        }
        out
    }
}
