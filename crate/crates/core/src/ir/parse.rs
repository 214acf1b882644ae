use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use super::{AccumOp, AffineTerm, ArrayRef, CombineOp, IndexExpr, Loop, LoopNestIR, Statement};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    Syntax(String),
    DuplicateIterator(String),
    NonIntegerBound(String),
    UnknownIterator(String),
    UnusedIterator(String),
    EmptyRange { iter: String, lower: i64, upper: i64 },
    BadStep(i64),
    MissingStatement,
    TrailingContent,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => write!(f, "empty loop nest"),
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::DuplicateIterator(i) => write!(f, "iterator `{i}` declared twice"),
            ParseErrorKind::NonIntegerBound(b) => {
                write!(f, "loop bound `{b}` is not an integer literal")
            }
            ParseErrorKind::UnknownIterator(i) => write!(f, "unknown iterator `{i}`"),
            ParseErrorKind::UnusedIterator(i) => {
                write!(f, "iterator `{i}` is not used by any array reference")
            }
            ParseErrorKind::EmptyRange { iter, lower, upper } => {
                write!(f, "loop `{iter}` has upper bound {upper} below lower bound {lower}")
            }
            ParseErrorKind::BadStep(s) => write!(f, "step must be positive, got {s}"),
            ParseErrorKind::MissingStatement => write!(f, "missing `stmt` line"),
            ParseErrorKind::TrailingContent => write!(f, "content after the statement"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Assign,
    PlusAssign,
    Plus,
    Star,
    LBracket,
    RBracket,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Assign => f.write_str("`=`"),
            Tok::PlusAssign => f.write_str("`+=`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Star => f.write_str("`*`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
        }
    }
}

/// Token plus 1-based column.
type Spanned = (Tok, usize);

fn lex(line_no: usize, text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<i64>().map_err(|_| ParseError {
                line: line_no,
                col,
                kind: ParseErrorKind::Syntax(format!("integer `{s}` out of range")),
            })?;
            out.push((Tok::Int(v), col));
            continue;
        }
        let tok = match c {
            '=' => Tok::Assign,
            '+' if chars.get(i + 1) == Some(&'=') => {
                i += 1;
                Tok::PlusAssign
            }
            '+' => Tok::Plus,
            '*' => Tok::Star,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            other => {
                return Err(ParseError {
                    line: line_no,
                    col,
                    kind: ParseErrorKind::Syntax(format!("unexpected character `{other}`")),
                })
            }
        };
        out.push((tok, col));
        i += 1;
    }
    Ok(out)
}

struct Cursor<'a> {
    line: usize,
    toks: &'a [Spanned],
    pos: usize,
    /// Column just past the end of the line, for end-of-line errors.
    eol: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.eol, |(_, c)| *c)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col(),
            kind,
        }
    }

    fn syntax(&self, expected: &str) -> ParseError {
        let found = match self.peek() {
            Some(t) => t.to_string(),
            None => "end of line".to_string(),
        };
        self.err(ParseErrorKind::Syntax(format!(
            "expected {expected}, found {found}"
        )))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.syntax(what)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(&format!("`{kw}`"))),
        }
    }

    fn bound(&mut self) -> Result<i64, ParseError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(s)) => Err(self.err(ParseErrorKind::NonIntegerBound(s.clone()))),
            _ => Err(self.syntax("integer bound")),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.syntax("end of line"))
        }
    }
}

/// Parses the textual loop-nest language described in [`crate::ir`].
pub fn parse_loop_nest(text: &str) -> Result<LoopNestIR, ParseError> {
    let mut loops: Vec<Loop> = Vec::new();
    let mut statement: Option<(Statement, usize)> = None;
    let mut any_content = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = lex(line_no, raw)?;
        if toks.is_empty() {
            continue;
        }
        any_content = true;
        let mut cur = Cursor {
            line: line_no,
            toks: &toks,
            pos: 0,
            eol: raw.chars().count() + 1,
        };
        if statement.is_some() {
            return Err(cur.err(ParseErrorKind::TrailingContent));
        }
        match cur.peek() {
            Some(Tok::Ident(kw)) if kw == "for" => {
                cur.pos += 1;
                let iter_col = cur.col();
                let iter = cur.ident("iterator name")?;
                if matches!(iter.as_str(), "for" | "stmt" | "to" | "step" | "max") {
                    return Err(ParseError {
                        line: line_no,
                        col: iter_col,
                        kind: ParseErrorKind::Syntax(format!("`{iter}` is a keyword")),
                    });
                }
                if loops.iter().any(|l| l.iter == iter) {
                    return Err(ParseError {
                        line: line_no,
                        col: iter_col,
                        kind: ParseErrorKind::DuplicateIterator(iter),
                    });
                }
                cur.expect(Tok::Assign, "`=`")?;
                let lower = cur.bound()?;
                cur.keyword("to")?;
                let upper = cur.bound()?;
                let mut step = 1;
                if !cur.at_end() {
                    cur.keyword("step")?;
                    let step_col = cur.col();
                    step = cur.bound()?;
                    if step <= 0 {
                        return Err(ParseError {
                            line: line_no,
                            col: step_col,
                            kind: ParseErrorKind::BadStep(step),
                        });
                    }
                }
                cur.finish()?;
                if upper < lower {
                    return Err(ParseError {
                        line: line_no,
                        col: 1,
                        kind: ParseErrorKind::EmptyRange { iter, lower, upper },
                    });
                }
                loops.push(Loop {
                    iter,
                    lower,
                    upper,
                    step,
                });
            }
            Some(Tok::Ident(kw)) if kw == "stmt" => {
                cur.pos += 1;
                let stmt = parse_statement(&mut cur, &loops)?;
                cur.finish()?;
                statement = Some((stmt, line_no));
            }
            _ => return Err(cur.syntax("`for` or `stmt`")),
        }
    }

    if !any_content {
        return Err(ParseError {
            line: 1,
            col: 1,
            kind: ParseErrorKind::Empty,
        });
    }
    let Some((statement, stmt_line)) = statement else {
        return Err(ParseError {
            line: text.lines().count().max(1),
            col: 1,
            kind: ParseErrorKind::MissingStatement,
        });
    };
    let used: HashSet<&str> = statement.refs().iter().flat_map(|r| r.iterators()).collect();
    if let Some(unused) = loops.iter().find(|l| !used.contains(l.iter.as_str())) {
        return Err(ParseError {
            line: stmt_line,
            col: 1,
            kind: ParseErrorKind::UnusedIterator(unused.iter.clone()),
        });
    }
    let statement_depth = loops.len();
    Ok(LoopNestIR {
        loops,
        statement,
        statement_depth,
    })
}

fn parse_statement(cur: &mut Cursor<'_>, loops: &[Loop]) -> Result<Statement, ParseError> {
    let target = parse_ref(cur, loops)?;
    let accum = match cur.peek() {
        Some(Tok::PlusAssign) => {
            cur.pos += 1;
            AccumOp::Add
        }
        Some(Tok::Assign) => {
            cur.pos += 1;
            AccumOp::Assign
        }
        Some(Tok::Ident(s)) if s == "max" => {
            cur.pos += 1;
            cur.expect(Tok::Assign, "`=` after `max`")?;
            AccumOp::Max
        }
        _ => return Err(cur.syntax("`+=`, `max=` or `=`")),
    };
    let lhs = parse_ref(cur, loops)?;
    let combine = match cur.next() {
        Some(Tok::Star) => CombineOp::Mul,
        Some(Tok::Plus) => CombineOp::Add,
        _ => {
            cur.pos -= 1;
            return Err(cur.syntax("`*` or `+`"));
        }
    };
    let rhs = parse_ref(cur, loops)?;
    Ok(Statement {
        target,
        accum,
        lhs,
        combine,
        rhs,
    })
}

fn parse_ref(cur: &mut Cursor<'_>, loops: &[Loop]) -> Result<ArrayRef, ParseError> {
    let name = cur.ident("array name")?;
    let mut indices = Vec::new();
    while cur.peek() == Some(&Tok::LBracket) {
        cur.pos += 1;
        indices.push(parse_expr(cur, loops)?);
        cur.expect(Tok::RBracket, "`]`")?;
    }
    if indices.is_empty() {
        return Err(cur.syntax("`[`"));
    }
    Ok(ArrayRef { name, indices })
}

fn parse_expr(cur: &mut Cursor<'_>, loops: &[Loop]) -> Result<IndexExpr, ParseError> {
    let mut expr = IndexExpr::default();
    loop {
        parse_term(cur, loops, &mut expr)?;
        if cur.peek() == Some(&Tok::Plus) {
            cur.pos += 1;
        } else {
            return Ok(expr);
        }
    }
}

fn parse_term(
    cur: &mut Cursor<'_>,
    loops: &[Loop],
    expr: &mut IndexExpr,
) -> Result<(), ParseError> {
    let col = cur.col();
    let line = cur.line;
    let check = |name: &str| -> Result<(), ParseError> {
        if loops.iter().any(|l| l.iter == name) {
            Ok(())
        } else {
            Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::UnknownIterator(name.to_string()),
            })
        }
    };
    match cur.next() {
        Some(Tok::Int(v)) => {
            if cur.peek() == Some(&Tok::Star) {
                cur.pos += 1;
                let name = cur.ident("iterator after `*`")?;
                check(&name)?;
                expr.terms.push(AffineTerm {
                    coeff: v,
                    iter: name,
                });
            } else {
                expr.constant += v;
            }
        }
        Some(Tok::Ident(name)) => {
            check(&name)?;
            let mut coeff = 1;
            if cur.peek() == Some(&Tok::Star) {
                cur.pos += 1;
                match cur.next() {
                    Some(Tok::Int(v)) => coeff = v,
                    _ => {
                        cur.pos -= 1;
                        return Err(cur.syntax("integer coefficient after `*`"));
                    }
                }
            }
            expr.terms.push(AffineTerm { coeff, iter: name });
        }
        _ => {
            cur.pos -= 1;
            return Err(cur.syntax("index term"));
        }
    }
    Ok(())
}
