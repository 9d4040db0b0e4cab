//! Recursive-descent parser for the CQL subset.
//!
//! ```text
//! lib      := "library" IDENT "version" STR header* define*
//! header   := "using" "FHIR" "version" STR
//!           | "include" IDENT "version" STR "called" IDENT
//!           | "codesystem" QNAME ":" STR
//!           | "code" QNAME ":" STR "from" QNAME ("display" STR)?
//! define   := COMMENT* "define" QNAME ":" expr
//! expr     := "if" expr "then" expr "else" expr | orExpr
//! orExpr   := andExpr ("or" andExpr)*
//! andExpr  := unary ("and" unary)*
//! unary    := "not" unary | primary (OP literal)?
//! primary  := "true" | "false" | STR | QNAME | IDENT "." QNAME
//!           | "exists" "(" retrieve ")" | "AgeInYears" "(" ")" | "(" expr ")"
//! retrieve := "[" IDENT (":" QNAME)? "]" (IDENT "where" cmp ("and" cmp)*)?
//! cmp      := PATH OP literal
//! ```
//!
//! A trailing comparison is only accepted after `AgeInYears()`.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::CqlError;

const MAX_NESTING: usize = 200;

struct Item {
    tok: Tok,
    location: Location,
    comments: Vec<String>,
}

struct Parser {
    items: Vec<Item>,
    pos: usize,
    depth: usize,
}

pub fn parse_library(source: &str) -> Result<Library, CqlError> {
    let mut p = Parser::new(tokenize(source)?);
    let lib = p.library()?;
    p.expect_eof()?;
    Ok(lib)
}

/// Parses raw bytes; invalid UTF-8 is a lexical error.
pub fn parse_library_bytes(source: &[u8]) -> Result<Library, CqlError> {
    let text = std::str::from_utf8(source)
        .map_err(|e| CqlError::Lex { message: format!("input is not UTF-8: {e}"), location: Location::new(1, 1) })?;
    parse_library(text)
}

/// Parses a standalone expression, e.g. a proposed node expression.
pub fn parse_expression(source: &str) -> Result<Expr, CqlError> {
    let mut p = Parser::new(tokenize(source)?);
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        let mut items = Vec::with_capacity(tokens.len());
        let mut comments = Vec::new();
        for t in tokens {
            match t.tok {
                Tok::LineComment(text) => comments.push(text),
                tok => items.push(Item { tok, location: t.location, comments: std::mem::take(&mut comments) }),
            }
        }
        Parser { items, pos: 0, depth: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.items[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.items.len() - 1);
        &self.items[i].tok
    }

    fn location(&self) -> Location {
        self.items[self.pos].location
    }

    fn advance(&mut self) -> Tok {
        let tok = self.items[self.pos].tok.clone();
        if self.pos + 1 < self.items.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: impl Into<String>) -> CqlError {
        CqlError::Parse { expected: expected.into(), found: self.peek().describe(), location: self.location() }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), CqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("`{kw}`")))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), CqlError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(tok.describe()))
        }
    }

    fn ident(&mut self) -> Result<String, CqlError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn qname(&mut self) -> Result<String, CqlError> {
        match self.peek() {
            Tok::QName(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error("quoted identifier")),
        }
    }

    fn string(&mut self) -> Result<String, CqlError> {
        match self.peek() {
            Tok::Str(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error("string literal")),
        }
    }

    fn expect_eof(&self) -> Result<(), CqlError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error("end of input"))
        }
    }

    fn library(&mut self) -> Result<Library, CqlError> {
        self.expect_kw("library")?;
        let name = self.ident()?;
        self.expect_kw("version")?;
        let version = self.string()?;
        let mut lib = Library {
            name,
            version,
            fhir_version: None,
            includes: Vec::new(),
            codesystems: Vec::new(),
            codes: Vec::new(),
            defines: Vec::new(),
        };
        loop {
            let location = self.location();
            if self.eat_kw("using") {
                self.expect_kw("FHIR")?;
                self.expect_kw("version")?;
                lib.fhir_version = Some(self.string()?);
            } else if self.eat_kw("include") {
                let name = self.ident()?;
                self.expect_kw("version")?;
                let version = self.string()?;
                self.expect_kw("called")?;
                let alias = self.ident()?;
                lib.includes.push(IncludeDecl { name, version, alias, location });
            } else if self.eat_kw("codesystem") {
                let name = self.qname()?;
                self.expect(Tok::Colon)?;
                let uri = self.string()?;
                lib.codesystems.push(CodeSystemDecl { name, uri, location });
            } else if self.eat_kw("code") {
                let name = self.qname()?;
                self.expect(Tok::Colon)?;
                let code = self.string()?;
                self.expect_kw("from")?;
                let codesystem = self.qname()?;
                let display = if self.eat_kw("display") { Some(self.string()?) } else { None };
                lib.codes.push(CodeDecl { name, code, codesystem, display, location });
            } else {
                break;
            }
        }
        while self.at_kw("define") {
            lib.defines.push(self.define()?);
        }
        if *self.peek() != Tok::Eof {
            return Err(self.error("`using`, `include`, `codesystem`, `code` or `define`"));
        }
        Ok(lib)
    }

    fn define(&mut self) -> Result<Define, CqlError> {
        let location = self.location();
        let mut comments = std::mem::take(&mut self.items[self.pos].comments);
        self.expect_kw("define")?;
        let name = self.qname()?;
        self.expect(Tok::Colon)?;
        let expression = self.expr()?;

        let node_binding = match comments.last() {
            Some(last) if last.starts_with("node:") => {
                let id = last["node:".len()..].trim().to_string();
                comments.pop();
                Some(id)
            }
            _ => None,
        };
        let leading_comment = (!comments.is_empty()).then(|| comments.join("\n"));
        Ok(Define { name, node_binding, leading_comment, expression, location })
    }

    fn nest(&mut self) -> Result<(), CqlError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(CqlError::Parse {
                expected: format!("at most {MAX_NESTING} levels of nesting"),
                found: self.peek().describe(),
                location: self.location(),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, CqlError> {
        self.nest()?;
        let e = if self.eat_kw("if") {
            // `else if` chains are read in a loop so long routing chains do
            // not count against the nesting limit.
            let mut branches = Vec::new();
            let otherwise = loop {
                let cond = self.expr()?;
                self.expect_kw("then")?;
                let then = self.expr()?;
                self.expect_kw("else")?;
                branches.push((cond, then));
                if !self.eat_kw("if") {
                    break self.expr()?;
                }
            };
            branches.into_iter().rev().fold(otherwise, |otherwise, (cond, then)| Expr::If {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            })
        } else {
            self.or_expr()?
        };
        self.depth -= 1;
        Ok(e)
    }

    fn or_expr(&mut self) -> Result<Expr, CqlError> {
        let mut e = self.and_expr()?;
        while self.eat_kw("or") {
            let r = self.and_expr()?;
            e = Expr::Or(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, CqlError> {
        let mut e = self.unary()?;
        while self.eat_kw("and") {
            let r = self.unary()?;
            e = Expr::And(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr, CqlError> {
        self.nest()?;
        let e = if self.eat_kw("not") {
            Expr::Not(Box::new(self.unary()?))
        } else {
            let location = self.location();
            let primary = self.primary()?;
            if let Tok::Op(op) = *self.peek() {
                if primary != Expr::AgeInYears {
                    return Err(CqlError::Parse {
                        expected: "comparison only after AgeInYears()".into(),
                        found: self.peek().describe(),
                        location,
                    });
                }
                self.advance();
                let right = self.literal()?;
                Expr::Compare { left: Box::new(primary), op, right }
            } else {
                primary
            }
        };
        self.depth -= 1;
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, CqlError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Tok::QName(name) => {
                self.advance();
                Ok(Expr::local(name))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(word) => match word.as_str() {
                "true" | "false" => {
                    self.advance();
                    Ok(Expr::Bool(word == "true"))
                }
                "exists" if *self.peek_at(1) == Tok::LParen => {
                    self.advance();
                    self.advance();
                    let r = self.retrieve()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Exists(r))
                }
                "AgeInYears" if *self.peek_at(1) == Tok::LParen => {
                    self.advance();
                    self.advance();
                    self.expect(Tok::RParen)?;
                    Ok(Expr::AgeInYears)
                }
                _ if *self.peek_at(1) == Tok::Dot => {
                    self.advance();
                    self.advance();
                    let name = self.qname()?;
                    Ok(Expr::aliased(word, name))
                }
                _ => Err(self.error("expression")),
            },
            _ => Err(self.error("expression")),
        }
    }

    fn retrieve(&mut self) -> Result<Retrieve, CqlError> {
        self.expect(Tok::LBracket)?;
        let resource = self.ident()?;
        let code_ref = if *self.peek() == Tok::Colon {
            self.advance();
            Some(self.qname()?)
        } else {
            None
        };
        self.expect(Tok::RBracket)?;
        let mut filters = Vec::new();
        if matches!(self.peek(), Tok::Ident(_)) {
            let alias = self.ident()?;
            self.expect_kw("where")?;
            loop {
                filters.push(self.filter(&alias)?);
                if !self.eat_kw("and") {
                    break;
                }
            }
        }
        Ok(Retrieve { resource, code_ref, filters })
    }

    fn filter(&mut self, alias: &str) -> Result<Filter, CqlError> {
        let mut segments = vec![self.ident()?];
        while *self.peek() == Tok::Dot {
            self.advance();
            segments.push(self.ident()?);
        }
        if segments.len() > 1 && segments[0] == alias {
            segments.remove(0);
        }
        let op = match self.peek() {
            Tok::Op(op) => *op,
            _ => return Err(self.error("comparison operator")),
        };
        self.advance();
        Ok(Filter { path: segments.join("."), op, value: self.literal()? })
    }

    fn literal(&mut self) -> Result<Literal, CqlError> {
        let lit = match self.peek().clone() {
            Tok::Str(s) => Literal::Text(s),
            Tok::Number(n) => Literal::Number(n),
            Tok::Date(d) => Literal::Date(d),
            Tok::Minus => {
                self.advance();
                match *self.peek() {
                    Tok::Number(n) => Literal::Number(-n),
                    _ => return Err(self.error("number")),
                }
            }
            Tok::Ident(w) if w == "true" || w == "false" => Literal::Bool(w == "true"),
            _ => return Err(self.error("literal")),
        };
        self.advance();
        Ok(lit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_library() {
        let lib = parse_library("library Demo version '1.0.0'\ndefine \"X\": true").unwrap();
        assert_eq!(lib.name, "Demo");
        assert_eq!(lib.version, "1.0.0");
        assert_eq!(lib.defines.len(), 1);
        assert_eq!(lib.defines[0].expression, Expr::Bool(true));
    }

    #[test]
    fn aliased_conjunction() {
        let e = parse_expression(r#"Defs."Node_2_Criteria" and Defs."Node_5_Criteria""#).unwrap();
        assert_eq!(
            e,
            Expr::And(Box::new(Expr::aliased("Defs", "Node_2_Criteria")), Box::new(Expr::aliased("Defs", "Node_5_Criteria")),)
        );
    }

    #[test]
    fn headers_and_bindings() {
        let src = "library D version '2.0.0'\n\
                   using FHIR version '4.0.1'\n\
                   include Other version '1.0.0' called O\n\
                   codesystem \"SNOMED\": 'http://snomed.info/sct'\n\
                   code \"ida\": '87522002' from \"SNOMED\" display 'IDA'\n\
                   // governance: reviewed\n\
                   // node: Node_7\n\
                   define \"Node_7_Criteria\": exists([Condition: \"ida\"])\n\
                   define \"Plain\": false\n";
        let lib = parse_library(src).unwrap();
        assert_eq!(lib.fhir_version.as_deref(), Some("4.0.1"));
        assert_eq!(lib.includes[0].alias, "O");
        assert_eq!(lib.codes[0].display.as_deref(), Some("IDA"));
        let d = &lib.defines[0];
        assert_eq!(d.node_binding.as_deref(), Some("Node_7"));
        assert_eq!(d.leading_comment.as_deref(), Some("governance: reviewed"));
        assert_eq!(d.location.key(), (8, 1));
        assert_eq!(lib.defines[1].node_binding, None);
    }

    #[test]
    fn retrieve_filters_strip_alias() {
        let e = parse_expression("exists([Observation: \"fit\"] R where R.value.value >= 10 and value.unit = 'ug/g')").unwrap();
        let Expr::Exists(r) = e else { panic!() };
        assert_eq!(r.resource, "Observation");
        assert_eq!(r.filters[0].path, "value.value");
        assert_eq!(r.filters[0].value, Literal::Number(10.0));
        assert_eq!(r.filters[1].path, "value.unit");
    }

    #[test]
    fn precedence_and_if() {
        let e = parse_expression("if a.\"x\" or not \"y\" and true then 'a' else if false then 'b' else 'c'");
        let Ok(Expr::If { cond, otherwise, .. }) = e else { panic!("{e:?}") };
        assert!(matches!(*cond, Expr::Or(_, _)));
        assert!(matches!(*otherwise, Expr::If { .. }));
    }

    #[test]
    fn age_comparison() {
        assert_eq!(
            parse_expression("AgeInYears() >= -1.5").unwrap(),
            Expr::Compare { left: Box::new(Expr::AgeInYears), op: CompareOp::Ge, right: Literal::Number(-1.5) }
        );
        assert!(parse_expression("\"x\" >= 3").is_err());
    }

    #[test]
    fn errors() {
        let err = parse_library("library X version '1'\ndefine \"A\" true").unwrap_err();
        match err {
            CqlError::Parse { expected, location, .. } => {
                assert_eq!(expected, "`:`");
                assert_eq!(location.key(), (2, 12));
            }
            e => panic!("{e:?}"),
        }
        assert!(matches!(parse_library("library X version 'unterminated"), Err(CqlError::Lex { .. })));
        assert!(parse_library("library X version '1' define \"A\": true junk").is_err());
        assert!(parse_expression(&"(".repeat(10_000)).is_err());
        assert!(parse_expression(&"not ".repeat(10_000)).is_err());
    }
}
