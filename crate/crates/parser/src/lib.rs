//! Parser and canonical serializer for the `.mpp` protocol DSL.
//!
//! ```text
//! def H0(A,B;c) = A->B:c<v.Tag>;              // named, parameterised protocol
//! def Buy(B,S;s,b) = B->S:s<v.Order>; S->B:b<v.Price{1..100}>;
//! main Buy;                                   // optional; defaults to last def
//! sync B^1 < S^2;                             // explicit synchronisation edge
//! impl B { send s Order(1); recv b x; }       // party program for simulation
//! ```
//!
//! A file may instead consist of a single bare protocol expression, which
//! becomes a parameterless definition named `main`.  Operators, loosest
//! first: `\/` (choice), `*` (concurrency), `;` (sequence); all associate to
//! the right.  Transmissions and invocations are labelled `1, 2, 3, …` in
//! textual order within each definition unless a label is written with
//! `@n`.  [`serialize`] always writes labels explicitly, so
//! `parse(serialize(f)) == f`.

mod lexer;

use std::collections::{BTreeSet, HashSet};

use lexer::{lex, Spanned, Tok};
use mercurius_ast::{
    Assertion, Channel, Event, Expr, GlobalProtocol, Interval, Invoke, Label, Msg, OrdKind,
    Ordering, Party, PartyProgram, Pattern, ProtocolDef, ProtocolFile, Stmt, Transmission,
    TreeShare, Value,
};
use thiserror::Error;

/// Errors reported by the parser.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("invocation of `{name}` expects {expected} arguments, found {found}")]
    ArityMismatch { name: String, expected: String, found: String },
    #[error("duplicate label {label} in `{def}`")]
    DuplicateLabel { def: String, label: Label },
    #[error("transmission at {line}:{col} has the same sender and receiver `{party}`")]
    DuplicateParty { party: Party, line: usize, col: usize },
    #[error("invocation of undefined protocol `{0}`")]
    UnknownDef(String),
    #[error("protocol `{0}` is defined twice")]
    DuplicateDef(String),
    #[error("no main protocol: the file defines nothing")]
    MissingMain,
}

const KEYWORDS: [&str; 4] = ["def", "main", "sync", "impl"];

/// Parses a complete `.mpp` file.
pub fn parse(text: &str) -> Result<ProtocolFile, ParseError> {
    let mut p = Parser::new(text)?;
    let file = p.file()?;
    resolve_invokes(&file, &p.split_invokes)?;
    let file = split_invokes(file, &p.split_invokes);
    Ok(file)
}

/// Parses a single protocol expression (no definitions or other items).
/// Invocations must separate party and channel arguments with `;`.
pub fn parse_protocol(text: &str) -> Result<GlobalProtocol, ParseError> {
    let mut p = Parser::new(text)?;
    p.begin_def("main");
    let g = p.expr()?;
    p.finish_def("main", &g)?;
    p.expect_eof()?;
    Ok(g)
}

/// Parses an assertion such as `S^3 <HB B1^4 & 1 <HB 3`.
pub fn parse_assertion(text: &str) -> Result<Assertion, ParseError> {
    let mut p = Parser::new(text)?;
    let a = p.assertion()?;
    p.expect_eof()?;
    Ok(a)
}

/// Parses an event such as `B1^4` or `B^2#1`.
pub fn parse_event(text: &str) -> Result<Event, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.event()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parses a synchronisation edge `A^1<B^2` (also accepted: `A^1 <HB B^2`).
pub fn parse_sync(text: &str) -> Result<(Event, Event), ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.sync_edge()?;
    p.expect_eof()?;
    Ok(e)
}

/// Renders a file in canonical DSL form.
pub fn serialize(f: &ProtocolFile) -> String {
    let mut out = String::new();
    let implicit = f.main == ProtocolFile::IMPLICIT_MAIN
        && f.main_def().is_some_and(|d| d.parties.is_empty() && d.channels.is_empty());
    for d in &f.defs {
        if implicit && d.name == f.main {
            out.push_str(&format!("{};\n", d.body));
        } else {
            out.push_str(&format!("{d}\n"));
        }
    }
    if !implicit && f.defs.last().map(|d| &d.name) != Some(&f.main) {
        out.push_str(&format!("main {};\n", f.main));
    }
    for (a, b) in &f.syncs {
        out.push_str(&format!("sync {a} < {b};\n"));
    }
    for prog in &f.programs {
        out.push_str(&format!("{prog}\n"));
    }
    out
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    /// Position-based label counter of the definition being parsed.
    counter: u32,
    /// Invocations whose arguments were written with an explicit `;` split.
    split_invokes: HashSet<(String, Label)>,
    current_def: String,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            counter: 0,
            split_invokes: HashSet::new(),
            current_def: String::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg: msg.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        self.err(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            let wanted = t.describe();
            self.unexpected(&wanted)
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.unexpected("end of input")
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(what),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            _ => self.unexpected("integer"),
        }
    }

    fn label(&mut self) -> Result<Label, ParseError> {
        let mut path = Vec::new();
        loop {
            let n = self.int()?;
            if n < 1 || n > u32::MAX as i64 {
                return self.err(format!("label segment {n} must be a positive integer"));
            }
            path.push(n as u32);
            if !self.eat(&Tok::Hash) {
                break;
            }
        }
        Ok(Label::new(path))
    }

    // ---- files --------------------------------------------------------

    fn file(&mut self) -> Result<ProtocolFile, ParseError> {
        let mut defs: Vec<ProtocolDef> = Vec::new();
        let mut main: Option<String> = None;
        let mut saw_bare = false;
        let mut syncs = Vec::new();
        let mut programs = Vec::new();
        while *self.peek() != Tok::Eof {
            if self.is_kw("def") {
                let d = self.def()?;
                if defs.iter().any(|x| x.name == d.name) {
                    return Err(ParseError::DuplicateDef(d.name));
                }
                defs.push(d);
            } else if self.is_kw("main") && matches!(self.peek_at(1), Tok::Ident(_)) {
                self.bump();
                if main.is_some() || saw_bare {
                    return self.err("main protocol declared more than once");
                }
                main = Some(self.ident("protocol name")?);
                self.expect(Tok::Semi)?;
            } else if self.is_kw("sync") {
                self.bump();
                syncs.push(self.sync_edge()?);
                self.expect(Tok::Semi)?;
            } else if self.is_kw("impl") {
                programs.push(self.program()?);
            } else {
                if saw_bare || main.is_some() {
                    return self.err("main protocol declared more than once");
                }
                let name = ProtocolFile::IMPLICIT_MAIN.to_string();
                if defs.iter().any(|x| x.name == name) {
                    return Err(ParseError::DuplicateDef(name));
                }
                self.begin_def(&name);
                let body = self.expr()?;
                self.finish_def(&name, &body)?;
                self.end_item()?;
                defs.push(ProtocolDef { name, parties: vec![], channels: vec![], body });
                saw_bare = true;
            }
        }
        let main = if saw_bare {
            ProtocolFile::IMPLICIT_MAIN.to_string()
        } else {
            match main {
                Some(m) => m,
                None => defs.last().map(|d| d.name.clone()).ok_or(ParseError::MissingMain)?,
            }
        };
        if !defs.iter().any(|d| d.name == main) {
            return Err(ParseError::UnknownDef(main));
        }
        Ok(ProtocolFile { defs, main, syncs, programs })
    }

    /// Consumes the `;` terminating a top-level item (optional at the end).
    fn end_item(&mut self) -> Result<(), ParseError> {
        if self.eat(&Tok::Semi) || *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.unexpected("`;`")
        }
    }

    fn def(&mut self) -> Result<ProtocolDef, ParseError> {
        self.bump(); // def
        let name = self.ident("protocol name")?;
        let (ps, cs, _) = self.arg_list("parameter name")?;
        let parties = ps.into_iter().map(Party::new).collect();
        let channels = cs.into_iter().map(Channel::new).collect();
        // Optional `<i,F>`: the label root and frontier are implicit.
        if self.eat(&Tok::Lt) {
            self.ident("label root")?;
            self.expect(Tok::Comma)?;
            self.ident("frontier")?;
            self.expect(Tok::Gt)?;
        }
        self.expect(Tok::Eq)?;
        self.begin_def(&name);
        let body = self.expr()?;
        self.finish_def(&name, &body)?;
        self.end_item()?;
        Ok(ProtocolDef { name, parties, channels, body })
    }

    /// Parses `(a,b;c,d)`, returning the identifiers before and after the
    /// `;` and whether a `;` was present.
    fn arg_list(&mut self, what: &str) -> Result<(Vec<String>, Vec<String>, bool), ParseError> {
        self.expect(Tok::LParen)?;
        let (mut first, mut second, mut split) = (Vec::new(), Vec::new(), false);
        loop {
            match self.peek() {
                Tok::RParen => break,
                Tok::Semi if !split => {
                    self.bump();
                    split = true;
                    continue;
                }
                _ => {}
            }
            let id = self.ident(what)?;
            if split {
                second.push(id);
            } else {
                first.push(id);
            }
            if !self.eat(&Tok::Comma) && !matches!(self.peek(), Tok::Semi if !split) {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        Ok((first, second, split))
    }

    fn begin_def(&mut self, name: &str) {
        self.counter = 0;
        self.current_def = name.to_string();
    }

    fn finish_def(&mut self, name: &str, body: &GlobalProtocol) -> Result<(), ParseError> {
        let mut seen = BTreeSet::new();
        let mut dup = None;
        body.visit(&mut |g| {
            let l = match g {
                GlobalProtocol::Trans(t) => &t.label,
                GlobalProtocol::Invoke(i) => &i.label,
                _ => return,
            };
            if !seen.insert(l.clone()) && dup.is_none() {
                dup = Some(l.clone());
            }
        });
        match dup {
            Some(label) => Err(ParseError::DuplicateLabel { def: name.to_string(), label }),
            None => Ok(()),
        }
    }

    // ---- protocol expressions -------------------------------------------

    fn expr(&mut self) -> Result<GlobalProtocol, ParseError> {
        let mut items = vec![self.par_expr()?];
        while self.eat(&Tok::Or) {
            items.push(self.par_expr()?);
        }
        Ok(GlobalProtocol::choice_all(items))
    }

    fn par_expr(&mut self) -> Result<GlobalProtocol, ParseError> {
        let mut items = vec![self.seq_expr()?];
        while self.eat(&Tok::Star) {
            items.push(self.seq_expr()?);
        }
        Ok(GlobalProtocol::par_all(items))
    }

    fn seq_expr(&mut self) -> Result<GlobalProtocol, ParseError> {
        let mut items = vec![self.atom()?];
        while *self.peek() == Tok::Semi && self.atom_follows(1) {
            self.bump();
            items.push(self.atom()?);
        }
        Ok(GlobalProtocol::seq_all(items))
    }

    /// Whether the token at offset `k` can start a protocol atom (as
    /// opposed to a `;` that terminates an item).
    fn atom_follows(&self, k: usize) -> bool {
        match self.peek_at(k) {
            Tok::LParen => true,
            Tok::Ident(s) => {
                !KEYWORDS.contains(&s.as_str())
                    || matches!(self.peek_at(k + 1), Tok::Arrow | Tok::LParen)
            }
            _ => false,
        }
    }

    fn atom(&mut self) -> Result<GlobalProtocol, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let g = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(g)
            }
            Tok::Ident(s) if s == "emp" && *self.peek_at(1) != Tok::Arrow => {
                self.bump();
                Ok(GlobalProtocol::Emp)
            }
            Tok::Ident(s)
                if (s == "assume" || s == "guard") && *self.peek_at(1) == Tok::LParen =>
            {
                self.bump();
                self.bump();
                let a = self.assertion()?;
                self.expect(Tok::RParen)?;
                Ok(if s == "assume" { GlobalProtocol::Assume(a) } else { GlobalProtocol::Guard(a) })
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::Arrow => self.transmission(),
            Tok::Ident(_) if *self.peek_at(1) == Tok::LParen => self.invoke(),
            _ => self.unexpected("a transmission, `emp`, `assume`, `guard`, an invocation or `(`"),
        }
    }

    fn next_label(&mut self) -> Result<Label, ParseError> {
        self.counter += 1;
        if self.eat(&Tok::At) {
            self.label()
        } else {
            Ok(Label::of(self.counter))
        }
    }

    fn transmission(&mut self) -> Result<GlobalProtocol, ParseError> {
        let (line, col) = self.here();
        let sender = Party::new(self.ident("sender")?);
        self.expect(Tok::Arrow)?;
        let receiver = Party::new(self.ident("receiver")?);
        self.expect(Tok::Colon)?;
        let channel = Channel::new(self.ident("channel")?);
        self.expect(Tok::Lt)?;
        let msg = self.msg()?;
        self.expect(Tok::Gt)?;
        let label = self.next_label()?;
        if sender == receiver {
            return Err(ParseError::DuplicateParty { party: sender, line, col });
        }
        Ok(GlobalProtocol::Trans(Transmission { sender, receiver, msg, channel, label }))
    }

    fn msg(&mut self) -> Result<Msg, ParseError> {
        let first = self.ident("message variable or tag")?;
        let (var, tag) = if self.eat(&Tok::Dot) {
            (first, self.ident("message tag")?)
        } else {
            ("v".to_string(), first)
        };
        let interval = self.opt_interval()?;
        Ok(Msg { var, tag, interval })
    }

    fn opt_interval(&mut self) -> Result<Option<Interval>, ParseError> {
        if !self.eat(&Tok::LBrace) {
            return Ok(None);
        }
        let lo = self.int()?;
        self.expect(Tok::DotDot)?;
        let hi = self.int()?;
        self.expect(Tok::RBrace)?;
        if lo > hi {
            return self.err(format!("empty interval {lo}..{hi}"));
        }
        Ok(Some(Interval::new(lo, hi)))
    }

    fn invoke(&mut self) -> Result<GlobalProtocol, ParseError> {
        let name = self.ident("protocol name")?;
        let (first, second, split) = self.arg_list("argument")?;
        let label = self.next_label()?;
        if split {
            self.split_invokes.insert((self.current_def.clone(), label.clone()));
        }
        Ok(GlobalProtocol::Invoke(Invoke {
            name,
            parties: first.into_iter().map(Party::new).collect(),
            channels: second.into_iter().map(Channel::new).collect(),
            label,
        }))
    }

    // ---- assertions ---------------------------------------------------------

    fn assertion(&mut self) -> Result<Assertion, ParseError> {
        let lhs = self.conjunction()?;
        if self.eat(&Tok::FatArrow) {
            let Assertion::Occ(e) = lhs else {
                return self.err("the left side of `=>` must be a single event");
            };
            let rhs = self.assertion()?;
            return Ok(Assertion::Implies(e, Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Assertion, ParseError> {
        let mut items = vec![self.unary()?];
        while self.eat(&Tok::Amp) {
            items.push(self.unary()?);
        }
        Ok(Assertion::and_all(items).expect("non-empty"))
    }

    fn ord_kind(&mut self) -> Result<Option<OrdKind>, ParseError> {
        let weak = match self.peek() {
            Tok::Lt => false,
            Tok::LtEq => true,
            _ => return Ok(None),
        };
        self.bump();
        let k = self.ident("`HB` or `CB`")?;
        match (weak, k.as_str()) {
            (false, "HB") => Ok(Some(OrdKind::HB)),
            (false, "CB") => Ok(Some(OrdKind::CB)),
            (true, "HB") => Ok(Some(OrdKind::WHB)),
            _ => self.err(format!("unknown ordering kind `{k}`")),
        }
    }

    fn unary(&mut self) -> Result<Assertion, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Assertion::Not(self.event()?))
            }
            Tok::LParen => {
                self.bump();
                let a = self.assertion()?;
                self.expect(Tok::RParen)?;
                Ok(a)
            }
            Tok::Int(_) => {
                let from = self.label()?;
                let Some(kind) = self.ord_kind()? else {
                    return self.unexpected("an ordering operator");
                };
                let to = self.label()?;
                Ok(Assertion::OrdT { kind, from, to })
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::Arrow => {
                let sender = Party::new(self.ident("sender")?);
                self.bump();
                let receiver = Party::new(self.ident("receiver")?);
                self.expect(Tok::Colon)?;
                let label = self.label()?;
                Ok(Assertion::Transmitted { sender, receiver, label })
            }
            Tok::Ident(_) => {
                let from = self.event()?;
                match self.ord_kind()? {
                    None => Ok(Assertion::Occ(from)),
                    Some(kind) => {
                        let to = self.event()?;
                        let mut o = Ordering::new(kind, from, to);
                        if self.eat(&Tok::At) {
                            o.share = Some(self.share()?);
                        }
                        Ok(Assertion::Ord(o))
                    }
                }
            }
            _ => self.unexpected("an assertion"),
        }
    }

    fn share(&mut self) -> Result<TreeShare, ParseError> {
        let text = self.share_text()?;
        text.parse::<TreeShare>().or_else(|e| self.err(e.to_string()))
    }

    fn share_text(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Int(n) => {
                self.bump();
                Ok(n.to_string())
            }
            Tok::LParen => {
                self.bump();
                let l = self.share_text()?;
                self.expect(Tok::Comma)?;
                let r = self.share_text()?;
                self.expect(Tok::RParen)?;
                Ok(format!("({l},{r})"))
            }
            _ => self.unexpected("a tree-share literal"),
        }
    }

    fn event(&mut self) -> Result<Event, ParseError> {
        let party = Party::new(self.ident("party")?);
        self.expect(Tok::Caret)?;
        let label = self.label()?;
        Ok(Event { party, label })
    }

    fn sync_edge(&mut self) -> Result<(Event, Event), ParseError> {
        let a = self.event()?;
        // Accept both `A^1 < B^2` and `A^1 <HB B^2`.
        let hb_suffix = matches!(self.peek_at(1), Tok::Ident(k) if k == "HB")
            && matches!(self.peek_at(2), Tok::Ident(_));
        self.expect(Tok::Lt)?;
        if hb_suffix {
            self.bump();
        }
        let b = self.event()?;
        Ok((a, b))
    }

    // ---- programs -------------------------------------------------------

    fn program(&mut self) -> Result<PartyProgram, ParseError> {
        self.bump(); // impl
        let party = Party::new(self.ident("party")?);
        let mut bound = HashSet::new();
        let body = self.block(&mut bound)?;
        Ok(PartyProgram { party, body })
    }

    fn block(&mut self, bound: &mut HashSet<String>) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            out.push(self.stmt(bound)?);
        }
        Ok(out)
    }

    fn stmt(&mut self, bound: &mut HashSet<String>) -> Result<Stmt, ParseError> {
        let kw = self.ident("a statement")?;
        let s = match kw.as_str() {
            "send" => {
                let chan = Channel::new(self.ident("channel")?);
                let name = self.ident("value or variable")?;
                let expr = if self.eat(&Tok::LParen) {
                    let num = self.int()?;
                    self.expect(Tok::RParen)?;
                    Expr::Lit(Value { tag: name, num })
                } else if bound.contains(&name) {
                    Expr::Var(name)
                } else {
                    Expr::Lit(Value { tag: name, num: 0 })
                };
                self.expect(Tok::Semi)?;
                Stmt::Send { chan, expr }
            }
            "recv" => {
                let chan = Channel::new(self.ident("channel")?);
                let var = self.ident("variable")?;
                bound.insert(var.clone());
                self.expect(Tok::Semi)?;
                Stmt::Recv { chan, var }
            }
            "open" => {
                let chan = Channel::new(self.ident("channel")?);
                let mut parties = Vec::new();
                if self.eat(&Tok::LParen) {
                    if *self.peek() != Tok::RParen {
                        loop {
                            parties.push(Party::new(self.ident("party")?));
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                self.expect(Tok::Semi)?;
                Stmt::Open { chan, parties }
            }
            "close" => {
                let chan = Channel::new(self.ident("channel")?);
                self.expect(Tok::Semi)?;
                Stmt::Close { chan }
            }
            "notifyAll" | "wait" => {
                let id = self.ident("synchronisation id")?;
                self.expect(Tok::Semi)?;
                if kw == "wait" {
                    Stmt::Wait(id)
                } else {
                    Stmt::NotifyAll(id)
                }
            }
            "skip" => {
                self.expect(Tok::Semi)?;
                Stmt::Skip
            }
            "par" => {
                let a = self.block(bound)?;
                if !self.is_kw("and") {
                    return self.unexpected("`and`");
                }
                self.bump();
                let b = self.block(bound)?;
                Stmt::Par(a, b)
            }
            "choose" => {
                let mut branches = vec![self.block(bound)?];
                while self.is_kw("or") {
                    self.bump();
                    branches.push(self.block(bound)?);
                }
                Stmt::Choose(branches)
            }
            "match" => {
                let var = self.ident("variable")?;
                self.expect(Tok::LBrace)?;
                let mut arms = Vec::new();
                while !self.eat(&Tok::RBrace) {
                    let tag = self.ident("tag")?;
                    let interval = self.opt_interval()?;
                    self.expect(Tok::FatArrow)?;
                    let body = self.block(bound)?;
                    arms.push((Pattern { tag, interval }, body));
                }
                Stmt::Match { var, arms }
            }
            other => return self.err(format!("unknown statement `{other}`")),
        };
        Ok(s)
    }
}

/// Checks every invocation against the arity of its definition.
fn resolve_invokes(
    file: &ProtocolFile,
    split: &HashSet<(String, Label)>,
) -> Result<(), ParseError> {
    for d in &file.defs {
        let mut err = None;
        d.body.visit(&mut |g| {
            let GlobalProtocol::Invoke(i) = g else { return };
            if err.is_some() {
                return;
            }
            let Some(target) = file.def(&i.name) else {
                err = Some(ParseError::UnknownDef(i.name.clone()));
                return;
            };
            let (np, nc) = (target.parties.len(), target.channels.len());
            let ok = if split.contains(&(d.name.clone(), i.label.clone())) {
                i.parties.len() == np && i.channels.len() == nc
            } else {
                i.parties.len() == np + nc
            };
            if !ok {
                err = Some(ParseError::ArityMismatch {
                    name: i.name.clone(),
                    expected: format!("{np} parties and {nc} channels"),
                    found: format!("{} arguments", i.parties.len() + i.channels.len()),
                });
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(())
}

/// Splits unsplit invocation arguments into parties and channels using the
/// arity of the invoked definition.
fn split_invokes(mut file: ProtocolFile, split: &HashSet<(String, Label)>) -> ProtocolFile {
    let arity: Vec<(String, usize)> =
        file.defs.iter().map(|d| (d.name.clone(), d.parties.len())).collect();
    for d in &mut file.defs {
        let name = d.name.clone();
        d.body = map_invokes(&d.body, &mut |i| {
            if split.contains(&(name.clone(), i.label.clone())) {
                return i.clone();
            }
            let np = arity.iter().find(|(n, _)| *n == i.name).map(|(_, k)| *k).unwrap_or(0);
            let mut parties = i.parties.clone();
            let chans = parties.split_off(np.min(parties.len()));
            Invoke {
                parties,
                channels: chans.into_iter().map(|p| Channel::new(p.as_str())).collect(),
                ..i.clone()
            }
        });
    }
    file
}

fn map_invokes(g: &GlobalProtocol, f: &mut impl FnMut(&Invoke) -> Invoke) -> GlobalProtocol {
    match g {
        GlobalProtocol::Invoke(i) => GlobalProtocol::Invoke(f(i)),
        GlobalProtocol::Seq(a, b) => GlobalProtocol::seq(map_invokes(a, f), map_invokes(b, f)),
        GlobalProtocol::Par(a, b) => GlobalProtocol::par(map_invokes(a, f), map_invokes(b, f)),
        GlobalProtocol::Choice(a, b) => {
            GlobalProtocol::choice(map_invokes(a, f), map_invokes(b, f))
        }
        other => other.clone(),
    }
}
