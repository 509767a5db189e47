//! Turtle-subset reader/writer.
//!
//! Supported forms: `@prefix` declarations, `<entity>` references,
//! `prefix:local` names, the `a` keyword, `;` predicate continuations, `.`
//! terminators, plain string literals, and `#` comments. No blank nodes,
//! collections, datatyped literals, or `,` object lists.

use std::collections::BTreeMap;
use std::fmt;

use super::{terms, Iri, KgError, KnowledgeGraph, Object, Triple};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, col {}: expected {}, found {}",
            self.line, self.col, self.expected, self.found
        )
    }
}

pub(crate) fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out
}

/// Deterministic serialization: sorted prefix block, then subject blocks
/// sorted by rendered subject, predicates and objects sorted within a block.
pub(crate) fn serialize(graph: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for (label, expansion) in graph.prefixes() {
        out.push_str(&format!("@prefix {label}: <{expansion}> .\n"));
    }

    let mut by_subject: BTreeMap<String, (Iri, BTreeMap<String, Vec<(String, Triple)>>)> =
        BTreeMap::new();
    for t in graph.triples() {
        let subject_key = t.subject.to_string();
        let predicate_key = super::render_predicate(&t.predicate);
        let object_key = t.object.to_string();
        by_subject
            .entry(subject_key)
            .or_insert_with(|| (t.subject.clone(), BTreeMap::new()))
            .1
            .entry(predicate_key)
            .or_default()
            .push((object_key, t.clone()));
    }

    for (subject_key, (_, predicates)) in &by_subject {
        out.push('\n');
        let mut lines = Vec::new();
        for (predicate_key, objects) in predicates {
            let mut objects = objects.clone();
            objects.sort_by(|a, b| a.0.cmp(&b.0));
            for (object_key, _) in objects {
                lines.push(format!("{predicate_key} {object_key}"));
            }
        }
        out.push_str(subject_key);
        out.push(' ');
        out.push_str(&lines.join(" ;\n    "));
        out.push_str(" .\n");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    AtPrefix,
    PrefixLabel(String), // "label:" in an @prefix declaration or a name
    PrefixedName(String, String),
    EntityRef(String), // <...>
    A,
    Semicolon,
    Dot,
    Literal(String),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::AtPrefix => write!(f, "@prefix"),
            Token::PrefixLabel(l) => write!(f, "{l}:"),
            Token::PrefixedName(p, l) => write!(f, "{p}:{l}"),
            Token::EntityRef(l) => write!(f, "<{l}>"),
            Token::A => write!(f, "a"),
            Token::Semicolon => write!(f, ";"),
            Token::Dot => write!(f, "."),
            Token::Literal(s) => write!(f, "\"{s}\""),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self { chars: text.chars().peekable(), line: 1, col: 1 }
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

    fn error(&self, expected: &str, found: &str) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    fn skip_ws_and_comments(&mut self) {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<(Token, usize, usize)>, ParseError> {
        self.skip_ws_and_comments();
        let (line, col) = (self.line, self.col);
        let Some(&c) = self.chars.peek() else { return Ok(None) };
        let token = match c {
            ';' => {
                self.bump();
                Token::Semicolon
            }
            '.' => {
                self.bump();
                Token::Dot
            }
            '<' => {
                self.bump();
                let mut local = String::new();
                loop {
                    match self.bump() {
                        Some('>') => break,
                        Some('\n') => {
                            return Err(self.error("`>` closing an entity reference", "end of line"))
                        }
                        Some(ch) => local.push(ch),
                        None => {
                            return Err(self.error("`>` closing an entity reference", "end of input"))
                        }
                    }
                }
                Token::EntityRef(local)
            }
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('\\') => s.push('\\'),
                            Some('"') => s.push('"'),
                            Some('n') => s.push('\n'),
                            Some('r') => s.push('\r'),
                            Some('t') => s.push('\t'),
                            other => {
                                return Err(self.error(
                                    "escape sequence \\\\ \\\" \\n \\r \\t",
                                    &other.map(String::from).unwrap_or_else(|| "end of input".into()),
                                ))
                            }
                        },
                        Some(ch) => s.push(ch),
                        None => return Err(self.error("closing `\"`", "end of input")),
                    }
                }
                Token::Literal(s)
            }
            '@' => {
                self.bump();
                let word = self.read_bare_word();
                if word == "prefix" {
                    Token::AtPrefix
                } else {
                    return Err(self.error("@prefix", &format!("@{word}")));
                }
            }
            _ if is_name_char(c) => {
                let word = self.read_bare_word();
                if self.chars.peek() == Some(&':') {
                    self.bump();
                    // Either "label:" (prefix declaration) or "prefix:local".
                    if self.chars.peek().map(|&ch| is_name_char(ch)).unwrap_or(false) {
                        let local = self.read_bare_word();
                        Token::PrefixedName(word, local)
                    } else {
                        Token::PrefixLabel(word)
                    }
                } else if word == "a" {
                    Token::A
                } else {
                    return Err(self.error("`:` after a bare name", &word));
                }
            }
            other => return Err(self.error("a Turtle token", &other.to_string())),
        };
        Ok(Some((token, line, col)))
    }

    fn read_bare_word(&mut self) -> String {
        let mut word = String::new();
        while let Some(&c) = self.chars.peek() {
            if is_name_char(c) {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        word
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

struct Parser {
    tokens: Vec<(Token, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Token, usize, usize)> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<(Token, usize, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, expected: &str) -> ParseError {
        match self.tokens.get(self.pos) {
            Some((token, line, col)) => ParseError {
                line: *line,
                col: *col,
                expected: expected.to_string(),
                found: token.to_string(),
            },
            None => ParseError {
                line: self.tokens.last().map(|(_, l, _)| *l).unwrap_or(1),
                col: self.tokens.last().map(|(_, _, c)| *c).unwrap_or(1),
                expected: expected.to_string(),
                found: "end of input".to_string(),
            },
        }
    }

    fn expect_dot(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some((Token::Dot, _, _)) => Ok(()),
            Some(_) => {
                self.pos -= 1;
                Err(self.error_at("`.`"))
            }
            None => Err(self.error_at("`.`")),
        }
    }
}

pub(crate) fn parse(text: &str) -> Result<KnowledgeGraph, KgError> {
    let mut lexer = Lexer::new(text);
    let mut tokens = Vec::new();
    while let Some(t) = lexer.next_token()? {
        tokens.push(t);
    }
    let mut parser = Parser { tokens, pos: 0 };
    let mut graph = KnowledgeGraph::with_prefixes(BTreeMap::new());

    while let Some((token, _, _)) = parser.peek() {
        match token {
            Token::AtPrefix => {
                parser.next();
                let label = match parser.next() {
                    Some((Token::PrefixLabel(l), _, _)) => l,
                    Some(_) => {
                        parser.pos -= 1;
                        return Err(parser.error_at("prefix label ending in `:`").into());
                    }
                    None => return Err(parser.error_at("prefix label ending in `:`").into()),
                };
                let expansion = match parser.next() {
                    Some((Token::EntityRef(e), _, _)) => e,
                    Some(_) => {
                        parser.pos -= 1;
                        return Err(parser.error_at("<expansion>").into());
                    }
                    None => return Err(parser.error_at("<expansion>").into()),
                };
                parser.expect_dot()?;
                graph.declare_prefix(&label, &expansion)?;
            }
            _ => parse_subject_block(&mut parser, &mut graph)?,
        }
    }
    Ok(graph)
}

fn parse_subject_block(parser: &mut Parser, graph: &mut KnowledgeGraph) -> Result<(), KgError> {
    let subject = parse_iri(parser, "a subject (prefix:local or <entity>)")?;
    loop {
        let predicate = match parser.next() {
            Some((Token::A, _, _)) => terms::rdf_type(),
            Some((Token::PrefixedName(p, l), _, _)) => Iri::new(&p, &l)?,
            Some((Token::EntityRef(l), _, _)) => Iri::entity(&l)?,
            Some(_) => {
                parser.pos -= 1;
                return Err(parser.error_at("a predicate").into());
            }
            None => return Err(parser.error_at("a predicate").into()),
        };
        let object = match parser.next() {
            Some((Token::PrefixedName(p, l), _, _)) => Object::Iri(Iri::new(&p, &l)?),
            Some((Token::EntityRef(l), _, _)) => Object::Iri(Iri::entity(&l)?),
            Some((Token::Literal(s), _, _)) => Object::Literal(s),
            Some(_) => {
                parser.pos -= 1;
                return Err(parser.error_at("an object (iri or string literal)").into());
            }
            None => return Err(parser.error_at("an object (iri or string literal)").into()),
        };
        graph.assert_triple(Triple::new(subject.clone(), predicate, object))?;
        match parser.next() {
            Some((Token::Semicolon, _, _)) => continue,
            Some((Token::Dot, _, _)) => return Ok(()),
            Some(_) => {
                parser.pos -= 1;
                return Err(parser.error_at("`;` or `.`").into());
            }
            None => return Err(parser.error_at("`;` or `.`").into()),
        }
    }
}

fn parse_iri(parser: &mut Parser, expected: &str) -> Result<Iri, KgError> {
    match parser.next() {
        Some((Token::PrefixedName(p, l), _, _)) => Ok(Iri::new(&p, &l)?),
        Some((Token::EntityRef(l), _, _)) => Ok(Iri::entity(&l)?),
        Some(_) => {
            parser.pos -= 1;
            Err(parser.error_at(expected).into())
        }
        None => Err(parser.error_at(expected).into()),
    }
}
