//! Recursive-descent parser for the rule grammar.
//!
//! ```text
//! query  := agg | rules
//! agg    := ("count" | kind feat) "(" rule ")"
//! kind   := "sum" | "max" | "min"
//! feat   := "{col=" INT ("*" INT)? "}"
//! rules  := rule (";" rule)*          -- union branches share a head
//! rule   := IDENT "(" terms? ")" ":-" atom ("," atom)*
//! atom   := IDENT "(" terms ")"
//! term   := IDENT | "'" chars "'" | INT
//! ```

use crate::data::Constant;
use crate::error::{Error, Result};

use super::{
    AggKind, AggregateQuery, Atom, ConjunctiveQuery, FeatureExpr, Query, Term, UnionQuery,
};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Star,
    Eq,
    ColonDash,
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        let tok = match c {
            '(' => {
                bump(&mut chars);
                Tok::LParen
            }
            ')' => {
                bump(&mut chars);
                Tok::RParen
            }
            '{' => {
                bump(&mut chars);
                Tok::LBrace
            }
            '}' => {
                bump(&mut chars);
                Tok::RBrace
            }
            ',' => {
                bump(&mut chars);
                Tok::Comma
            }
            ';' => {
                bump(&mut chars);
                Tok::Semi
            }
            '*' => {
                bump(&mut chars);
                Tok::Star
            }
            '=' => {
                bump(&mut chars);
                Tok::Eq
            }
            ':' => {
                bump(&mut chars);
                match chars.peek() {
                    Some('-') => {
                        bump(&mut chars);
                        Tok::ColonDash
                    }
                    _ => return Err(syntax(l, col, "expected ':-'")),
                }
            }
            '\'' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match chars.peek() {
                        Some('\'') => {
                            bump(&mut chars);
                            break;
                        }
                        Some('\n') | None => {
                            return Err(syntax(l, col, "unterminated string literal"))
                        }
                        Some(_) => s.push(bump(&mut chars)),
                    }
                }
                Tok::Str(s)
            }
            '-' => {
                bump(&mut chars);
                let mut digits = String::from("-");
                while let Some(d) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                if digits == "-" {
                    return Err(syntax(l, col, "expected digits after '-'"));
                }
                let n = digits
                    .parse::<i64>()
                    .map_err(|_| syntax(l, col, "integer literal out of range"))?;
                Tok::Int(n)
            }
            d if d.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(d) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                let n = digits
                    .parse::<i64>()
                    .map_err(|_| syntax(l, col, "integer literal out of range"))?;
                Tok::Int(n)
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut ident = String::new();
                while let Some(&x) = chars.peek() {
                    if x.is_ascii_alphanumeric() || x == '_' {
                        ident.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                Tok::Ident(ident)
            }
            other => return Err(syntax(l, col, format!("unexpected character {other:?}"))),
        };
        out.push(Spanned {
            tok,
            line: l,
            column: col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Spanned> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(syntax(t.line, t.column, format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize)> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.line, t.column)),
            _ => Err(syntax(t.line, t.column, format!("expected {what}"))),
        }
    }

    fn int(&mut self, what: &str) -> Result<i64> {
        let t = self.next();
        match t.tok {
            Tok::Int(n) => Ok(n),
            _ => Err(syntax(t.line, t.column, format!("expected {what}"))),
        }
    }

    fn term(&mut self) -> Result<Term> {
        let t = self.next();
        match t.tok {
            Tok::Ident(v) => Ok(Term::Var(v)),
            Tok::Int(n) => Ok(Term::Const(Constant::Int(n))),
            Tok::Str(s) => Ok(Term::Const(Constant::Str(s))),
            _ => Err(syntax(t.line, t.column, "expected a term")),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let (relation, _, _) = self.ident("a relation name")?;
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        loop {
            args.push(self.term()?);
            let t = self.next();
            match t.tok {
                Tok::Comma => continue,
                Tok::RParen => break,
                _ => return Err(syntax(t.line, t.column, "expected ',' or ')'")),
            }
        }
        Ok(Atom { relation, args })
    }

    fn rule(&mut self) -> Result<ConjunctiveQuery> {
        let (name, _, _) = self.ident("a rule name")?;
        self.expect(Tok::LParen, "'('")?;
        let mut head = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                let t = self.next();
                match t.tok {
                    Tok::Ident(v) => head.push(v),
                    Tok::Int(_) | Tok::Str(_) => {
                        return Err(syntax(t.line, t.column, "head arguments must be variables"))
                    }
                    _ => return Err(syntax(t.line, t.column, "expected a head variable")),
                }
                let t = self.next();
                match t.tok {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    _ => return Err(syntax(t.line, t.column, "expected ',' or ')'")),
                }
            }
        } else {
            self.next(); // consume ')'
        }
        self.expect(Tok::ColonDash, "':-'")?;
        let mut body = vec![self.atom()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            body.push(self.atom()?);
        }
        let q = ConjunctiveQuery { name, head, body };
        q.check_safety()?;
        Ok(q)
    }

    fn feature(&mut self, head_arity: usize) -> Result<FeatureExpr> {
        let open = self.expect(Tok::LBrace, "'{'")?;
        let (kw, line, column) = self.ident("'col'")?;
        if kw != "col" {
            return Err(syntax(line, column, "expected 'col'"));
        }
        self.expect(Tok::Eq, "'='")?;
        let i = self.int("a column index")?;
        let feature = if self.peek().tok == Tok::Star {
            self.next();
            let j = self.int("a column index")?;
            FeatureExpr::Prod(i as usize, j as usize)
        } else {
            FeatureExpr::Col(i as usize)
        };
        self.expect(Tok::RBrace, "'}'")?;
        let check = |idx: usize| -> Result<()> {
            if idx == 0 || idx > head_arity {
                Err(syntax(
                    open.line,
                    open.column,
                    format!("column {idx} outside the head arity {head_arity}"),
                ))
            } else {
                Ok(())
            }
        };
        match feature {
            FeatureExpr::Col(i) => check(i)?,
            FeatureExpr::Prod(i, j) => {
                check(i)?;
                check(j)?;
            }
            FeatureExpr::One => {}
        }
        Ok(feature)
    }

    fn query(&mut self) -> Result<Query> {
        // Aggregate heads are only treated as such when the shape matches:
        // `sum{`/`max{`/`min{` or `count(` followed by an inner rule.
        if let Tok::Ident(name) = &self.peek().tok {
            let kind = match name.as_str() {
                "count" => Some(AggKind::Count),
                "sum" => Some(AggKind::Sum),
                "max" => Some(AggKind::Max),
                "min" => Some(AggKind::Min),
                _ => None,
            };
            if let Some(kind) = kind {
                let aggregate_shape = match kind {
                    AggKind::Count => {
                        *self.peek_at(1) == Tok::LParen
                            && matches!(self.peek_at(2), Tok::Ident(_))
                            && *self.peek_at(3) == Tok::LParen
                    }
                    _ => *self.peek_at(1) == Tok::LBrace,
                };
                if aggregate_shape {
                    self.next(); // the kind keyword
                    let feature = match kind {
                        AggKind::Count => FeatureExpr::One,
                        // head arity is unknown until the rule is parsed;
                        // column bounds are re-checked below
                        _ => self.feature(usize::MAX)?,
                    };
                    let open = self.expect(Tok::LParen, "'('")?;
                    let inner = self.rule()?;
                    self.expect(Tok::RParen, "')'")?;
                    let arity = inner.head.len();
                    let in_range = |i: usize| i >= 1 && i <= arity;
                    let ok = match feature {
                        FeatureExpr::One => true,
                        FeatureExpr::Col(i) => in_range(i),
                        FeatureExpr::Prod(i, j) => in_range(i) && in_range(j),
                    };
                    if !ok {
                        return Err(syntax(
                            open.line,
                            open.column,
                            format!("feature column outside the head arity {arity}"),
                        ));
                    }
                    let t = self.peek();
                    if t.tok != Tok::Eof {
                        return Err(syntax(t.line, t.column, "trailing input after aggregate"));
                    }
                    return Ok(Query::Aggregate(AggregateQuery {
                        kind,
                        feature,
                        inner,
                    }));
                }
            }
        }

        let mut branches = vec![self.rule()?];
        while self.peek().tok == Tok::Semi {
            self.next();
            branches.push(self.rule()?);
        }
        let t = self.peek();
        if t.tok != Tok::Eof {
            return Err(syntax(t.line, t.column, "trailing input after rule"));
        }
        if branches.len() == 1 {
            Ok(Query::Cq(branches.pop().unwrap()))
        } else {
            Ok(Query::Union(UnionQuery::new(branches)?))
        }
    }
}

/// Parses a query. Errors carry 1-based line and column positions.
pub fn parse_query(text: &str) -> Result<Query> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.query()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_boolean_rule() {
        let q = parse_query("q() :- R(x), S(x,y), T(y)").unwrap();
        match q {
            Query::Cq(cq) => {
                assert!(cq.is_boolean());
                assert_eq!(cq.body.len(), 3);
            }
            _ => panic!("expected a rule"),
        }
    }

    #[test]
    fn unsafe_head_is_rejected() {
        let err = parse_query("q(w) :- R(x,y), S(z)").unwrap_err();
        assert!(matches!(err, Error::UnsafeHead { variable } if variable == "w"));
    }

    #[test]
    fn parses_sum_aggregate() {
        let q =
            parse_query("sum{col=2}( q(z,w) :- Author(x,y), Pub(x,z), Citations(z,w) )").unwrap();
        match q {
            Query::Aggregate(a) => {
                assert_eq!(a.kind, AggKind::Sum);
                assert_eq!(a.feature, FeatureExpr::Col(2));
                assert_eq!(a.inner.head, vec!["z".to_string(), "w".to_string()]);
            }
            _ => panic!("expected an aggregate"),
        }
    }

    #[test]
    fn count_distinguishes_rule_named_count() {
        let q = parse_query("count( q(z) :- R(z) )").unwrap();
        assert!(matches!(q, Query::Aggregate(a) if a.kind == AggKind::Count));
        let q = parse_query("count(z) :- R(z)").unwrap();
        assert!(matches!(q, Query::Cq(c) if c.name == "count"));
    }

    #[test]
    fn product_feature_and_bounds() {
        let q = parse_query("sum{col=1*2}( q(a,b) :- R(a,b) )").unwrap();
        assert!(matches!(
            q,
            Query::Aggregate(a) if a.feature == FeatureExpr::Prod(1, 2)
        ));
        let err = parse_query("sum{col=3}( q(a,b) :- R(a,b) )").unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }));
    }

    #[test]
    fn union_shares_head() {
        let q = parse_query("q(x) :- R(x) ; q(x) :- S(x)").unwrap();
        assert!(matches!(q, Query::Union(u) if u.branches.len() == 2));
        let err = parse_query("q(x) :- R(x) ; q(y) :- S(y)").unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_query("q() :-\n R(x,,y)").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column >= 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constants_in_atoms() {
        let q = parse_query("q() :- Author(x,'UCLA'), Citations('A',18), R(x,-3)").unwrap();
        match q {
            Query::Cq(c) => {
                assert_eq!(c.body[1].args[1], Term::Const(Constant::Int(18)),);
                assert_eq!(c.body[2].args[1], Term::Const(Constant::Int(-3)));
            }
            _ => unreachable!(),
        }
    }
}
