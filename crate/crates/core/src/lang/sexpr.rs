//! Parser for the record translation language.
//!
//! A program is one `(record ...)` form holding `(field "name" EXPR)`
//! entries. Expressions are built from a closed set of primitives: `get`,
//! `const`, `to-int`, `to-float`, `scale`, `concat`, `if`, `eq` and
//! `parent-of`. Parsing is whitespace-insensitive; every node keeps its
//! source position for error reporting, and `;` starts a line comment.

use super::LangError;

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

/// A literal in `(const ...)` position.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    /// Value of a source record field; absent fields evaluate to missing.
    Get(String),
    Const(Literal),
    /// Truncates toward zero.
    ToInt(Box<Expr>),
    ToFloat(Box<Expr>),
    /// Multiplies by a constant factor in float64.
    Scale(Box<Expr>, f64),
    Concat(Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    /// Id of the most recent prior chain root whose named output field had
    /// the same value this record has.
    ParentOf(String),
}

/// A parsed program: named output fields in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SexprProgram {
    pub fields: Vec<(String, Expr)>,
}

impl SexprProgram {
    pub fn field(&self, name: &str) -> Option<&Expr> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    LParen,
    RParen,
    Str(String),
    Int(i64),
    Float(f64),
    Symbol(String),
}

fn bad_form(what: impl Into<String>, pos: Pos) -> LangError {
    LangError::BadForm {
        what: what.into(),
        line: pos.line,
        col: pos.col,
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Token, Pos)>, LangError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
            if self.chars.peek() == Some(&';') {
                while !matches!(self.chars.peek(), None | Some('\n')) {
                    self.bump();
                }
                continue;
            }
            let pos = self.pos();
            let Some(c) = self.bump() else {
                return Ok(out);
            };
            match c {
                '(' => out.push((Token::LParen, pos)),
                ')' => out.push((Token::RParen, pos)),
                '"' => out.push((Token::Str(self.string_body(pos)?), pos)),
                _ => {
                    let mut atom = String::from(c);
                    while matches!(
                        self.chars.peek(),
                        Some(c) if !c.is_whitespace() && !matches!(c, '(' | ')' | '"' | ';')
                    ) {
                        atom.push(self.bump().unwrap());
                    }
                    out.push((classify_atom(atom), pos));
                }
            }
        }
    }

    fn string_body(&mut self, start: Pos) -> Result<String, LangError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    return Err(bad_form("unterminated string literal", start));
                }
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    other => {
                        return Err(bad_form(format!("bad escape {other:?}"), start));
                    }
                },
                Some(c) => s.push(c),
            }
        }
    }
}

fn classify_atom(atom: String) -> Token {
    if let Ok(v) = atom.parse::<i64>() {
        return Token::Int(v);
    }
    if let Ok(v) = atom.parse::<f64>() {
        if v.is_finite() {
            return Token::Float(v);
        }
    }
    Token::Symbol(atom)
}

/// Generic s-expression tree, before lowering to program forms.
enum Sx {
    Atom(Token, Pos),
    List(Vec<Sx>, Pos),
}

impl Sx {
    fn pos(&self) -> Pos {
        match self {
            Sx::Atom(_, p) | Sx::List(_, p) => *p,
        }
    }
}

fn parse_sx(tokens: &[(Token, Pos)], at: &mut usize) -> Result<Sx, LangError> {
    let (token, pos) = tokens
        .get(*at)
        .ok_or(LangError::NonRecordRoot)?;
    *at += 1;
    match token {
        Token::LParen => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*at) {
                    None => {
                        return Err(LangError::UnbalancedParens {
                            line: pos.line,
                            col: pos.col,
                        });
                    }
                    Some((Token::RParen, _)) => {
                        *at += 1;
                        return Ok(Sx::List(items, *pos));
                    }
                    Some(_) => items.push(parse_sx(tokens, at)?),
                }
            }
        }
        Token::RParen => Err(LangError::UnbalancedParens {
            line: pos.line,
            col: pos.col,
        }),
        t => Ok(Sx::Atom(t.clone(), *pos)),
    }
}

/// Parses a translation program.
pub fn parse_program(text: &str) -> Result<SexprProgram, LangError> {
    let tokens = Lexer::new(text).tokens()?;
    let mut at = 0;
    let root = parse_sx(&tokens, &mut at)?;
    if let Some((_, pos)) = tokens.get(at) {
        return Err(bad_form("a program is a single (record ...) form", *pos));
    }
    lower_program(root)
}

fn lower_program(root: Sx) -> Result<SexprProgram, LangError> {
    let Sx::List(items, _) = root else {
        return Err(LangError::NonRecordRoot);
    };
    let mut items = items.into_iter();
    match items.next() {
        Some(Sx::Atom(Token::Symbol(s), _)) if s == "record" => {}
        _ => return Err(LangError::NonRecordRoot),
    }

    let mut fields: Vec<(String, Expr)> = Vec::new();
    for item in items {
        let pos = item.pos();
        let Sx::List(parts, _) = item else {
            return Err(bad_form("record entries must be (field ...) forms", pos));
        };
        let mut parts = parts.into_iter();
        match parts.next() {
            Some(Sx::Atom(Token::Symbol(s), _)) if s == "field" => {}
            _ => return Err(bad_form("record entries must be (field ...) forms", pos)),
        }
        let name = match parts.next() {
            Some(Sx::Atom(Token::Str(n), _)) => n,
            other => {
                return Err(bad_form(
                    "field needs a string name",
                    other.map_or(pos, |s| s.pos()),
                ));
            }
        };
        let expr = match (parts.next(), parts.next()) {
            (Some(e), None) => lower_expr(e)?,
            _ => return Err(bad_form("field takes exactly one expression", pos)),
        };
        if fields.iter().any(|(n, _)| *n == name) {
            return Err(LangError::DuplicateField(name));
        }
        // parent-of may only reference fields already declared, so lookups
        // are well-defined at evaluation time.
        check_parent_refs(&expr, &fields)?;
        fields.push((name, expr));
    }
    Ok(SexprProgram { fields })
}

fn check_parent_refs(expr: &Expr, declared: &[(String, Expr)]) -> Result<(), LangError> {
    match &expr.kind {
        ExprKind::ParentOf(name) => {
            if !declared.iter().any(|(n, _)| n == name) {
                return Err(bad_form(
                    format!("parent-of references undeclared field {name:?}"),
                    expr.pos,
                ));
            }
        }
        ExprKind::ToInt(e) | ExprKind::ToFloat(e) | ExprKind::Scale(e, _) => {
            check_parent_refs(e, declared)?;
        }
        ExprKind::Concat(es) => {
            for e in es {
                check_parent_refs(e, declared)?;
            }
        }
        ExprKind::If(c, t, f) => {
            check_parent_refs(c, declared)?;
            check_parent_refs(t, declared)?;
            check_parent_refs(f, declared)?;
        }
        ExprKind::Eq(a, b) => {
            check_parent_refs(a, declared)?;
            check_parent_refs(b, declared)?;
        }
        ExprKind::Get(_) | ExprKind::Const(_) => {}
    }
    Ok(())
}

fn lower_expr(sx: Sx) -> Result<Expr, LangError> {
    let pos = sx.pos();
    let Sx::List(parts, _) = sx else {
        return Err(bad_form("bare literal; wrap it in (const ...)", pos));
    };
    let mut parts = parts.into_iter();
    let head = match parts.next() {
        Some(Sx::Atom(Token::Symbol(s), _)) => s,
        other => {
            return Err(bad_form(
                "expression must start with a primitive name",
                other.map_or(pos, |s| s.pos()),
            ));
        }
    };
    let rest: Vec<Sx> = parts.collect();
    let arity = |want: usize| -> Result<(), LangError> {
        if rest.len() == want {
            Ok(())
        } else {
            Err(bad_form(
                format!("{head} takes {want} argument(s), got {}", rest.len()),
                pos,
            ))
        }
    };

    let kind = match head.as_str() {
        "get" | "parent-of" => {
            arity(1)?;
            let name = match rest.into_iter().next() {
                Some(Sx::Atom(Token::Str(n), _)) => n,
                other => {
                    return Err(bad_form(
                        format!("{head} needs a string field name"),
                        other.map_or(pos, |s| s.pos()),
                    ));
                }
            };
            if head == "get" {
                ExprKind::Get(name)
            } else {
                ExprKind::ParentOf(name)
            }
        }
        "const" => {
            arity(1)?;
            let lit = match rest.into_iter().next() {
                Some(Sx::Atom(Token::Int(v), _)) => Literal::Int(v),
                Some(Sx::Atom(Token::Float(v), _)) => Literal::Float(v),
                Some(Sx::Atom(Token::Str(v), _)) => Literal::Str(v),
                other => {
                    return Err(bad_form(
                        "const takes one literal",
                        other.map_or(pos, |s| s.pos()),
                    ));
                }
            };
            ExprKind::Const(lit)
        }
        "to-int" | "to-float" => {
            arity(1)?;
            let inner = Box::new(lower_expr(rest.into_iter().next().unwrap())?);
            if head == "to-int" {
                ExprKind::ToInt(inner)
            } else {
                ExprKind::ToFloat(inner)
            }
        }
        "scale" => {
            arity(2)?;
            let mut it = rest.into_iter();
            let inner = Box::new(lower_expr(it.next().unwrap())?);
            let factor = match it.next() {
                Some(Sx::Atom(Token::Int(v), _)) => v as f64,
                Some(Sx::Atom(Token::Float(v), _)) => v,
                other => {
                    return Err(bad_form(
                        "scale factor must be a numeric literal",
                        other.map_or(pos, |s| s.pos()),
                    ));
                }
            };
            ExprKind::Scale(inner, factor)
        }
        "concat" => {
            if rest.is_empty() {
                return Err(bad_form("concat needs at least one argument", pos));
            }
            let mut exprs = Vec::with_capacity(rest.len());
            for part in rest {
                exprs.push(lower_expr(part)?);
            }
            ExprKind::Concat(exprs)
        }
        "if" => {
            arity(3)?;
            let mut it = rest.into_iter();
            ExprKind::If(
                Box::new(lower_expr(it.next().unwrap())?),
                Box::new(lower_expr(it.next().unwrap())?),
                Box::new(lower_expr(it.next().unwrap())?),
            )
        }
        "eq" => {
            arity(2)?;
            let mut it = rest.into_iter();
            ExprKind::Eq(
                Box::new(lower_expr(it.next().unwrap())?),
                Box::new(lower_expr(it.next().unwrap())?),
            )
        }
        "record" | "field" => {
            return Err(bad_form(format!("{head} is not valid here"), pos));
        }
        _ => {
            return Err(LangError::UnknownPrimitive {
                name: head,
                line: pos.line,
                col: pos.col,
            });
        }
    };
    Ok(Expr { kind, pos })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program_parses() {
        let p = parse_program(r#"(record (field "op" (get "syscall")))"#).unwrap();
        assert_eq!(p.fields.len(), 1);
        assert_eq!(p.fields[0].0, "op");
        assert!(matches!(
            &p.fields[0].1.kind,
            ExprKind::Get(n) if n == "syscall"
        ));
    }

    #[test]
    fn seconds_to_nanoseconds_shape() {
        let p =
            parse_program(r#"(record (field "t" (scale (to-float (get "ts")) 1000000000)))"#)
                .unwrap();
        match &p.field("t").unwrap().kind {
            ExprKind::Scale(inner, factor) => {
                assert_eq!(*factor, 1e9);
                assert!(matches!(inner.kind, ExprKind::ToFloat(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_primitive_is_named_and_positioned() {
        let err = parse_program("(record\n  (field \"a\" (frobnicate 1)))");
        match err {
            Err(LangError::UnknownPrimitive { name, line, col }) => {
                assert_eq!(name, "frobnicate");
                assert_eq!(line, 2);
                assert_eq!(col, 14);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn unbalanced_parens_point_at_the_opener() {
        let err = parse_program(r#"(record (field "a" (get "x"))"#);
        match err {
            Err(LangError::UnbalancedParens { line: 1, col: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        let err = parse_program(r#"(record (field "a" (get "x"))))"#);
        match err {
            Err(LangError::BadForm { col: 31, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn duplicate_fields_are_rejected() {
        let err = parse_program(
            r#"(record (field "a" (const 1)) (field "a" (const 2)))"#,
        );
        assert!(matches!(err, Err(LangError::DuplicateField(n)) if n == "a"));
    }

    #[test]
    fn root_must_be_a_record() {
        for text in [r#"(get "x")"#, r#"(field "a" (const 1))"#, "", "()"] {
            assert!(
                matches!(parse_program(text), Err(LangError::NonRecordRoot)),
                "text: {text:?}"
            );
        }
    }

    #[test]
    fn comments_and_whitespace_are_free() {
        let p = parse_program(
            "; maps one column\n(record\n  (field \"x\"  ; the only field\n   (get \"a\")))",
        )
        .unwrap();
        assert_eq!(p.fields.len(), 1);
    }

    #[test]
    fn string_escapes_in_literals() {
        let p = parse_program(r#"(record (field "x" (const "a\"b\\c")))"#).unwrap();
        match &p.field("x").unwrap().kind {
            ExprKind::Const(Literal::Str(s)) => assert_eq!(s, "a\"b\\c"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parent_of_must_reference_an_earlier_field() {
        let ok = parse_program(
            r#"(record (field "fd" (get "fd")) (field "p" (parent-of "fd")))"#,
        );
        assert!(ok.is_ok());
        let err = parse_program(r#"(record (field "p" (parent-of "fd")))"#);
        assert!(matches!(err, Err(LangError::BadForm { .. })));
    }

    #[test]
    fn misplaced_structural_forms_are_bad() {
        let err = parse_program(r#"(record (field "a" (record)))"#);
        assert!(matches!(err, Err(LangError::BadForm { .. })));
        let err = parse_program(r#"(record (get "x"))"#);
        assert!(matches!(err, Err(LangError::BadForm { .. })));
    }

    #[test]
    fn scale_factor_must_be_literal() {
        let err = parse_program(r#"(record (field "a" (scale (get "x") (get "y"))))"#);
        assert!(matches!(err, Err(LangError::BadForm { .. })));
    }
}
