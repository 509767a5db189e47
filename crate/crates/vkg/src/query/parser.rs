//! Tuple-notation query parser: clauses like `{search, 'seed', V}` joined by
//! `;` (or `∪`), whitespace-insensitive, with an optional enclosing brace
//! pair around the whole clause list.

use super::{ClassFilter, Clause, ClauseKind, InferArg, QueryAst, QueryError, SubjectArg};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    LBrace,
    RBrace,
    Comma,
    Separator,
    Quoted(String),
    Bare(String),
    Int(usize),
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Token::LBrace => write!(f, "{{"),
            Token::RBrace => write!(f, "}}"),
            Token::Comma => write!(f, ","),
            Token::Separator => write!(f, ";"),
            Token::Quoted(s) => write!(f, "'{s}'"),
            Token::Bare(s) => write!(f, "{s}"),
            Token::Int(n) => write!(f, "{n}"),
        }
    }
}

struct Positioned {
    token: Token,
    line: usize,
    col: usize,
}

fn is_bare_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | ':' | '.' | '-' | '*' | '<' | '>')
}

fn tokenize(text: &str) -> Result<Vec<Positioned>, QueryError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    loop {
        let (tok_line, tok_col) = (line, col);
        let Some(&c) = chars.peek() else { break };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        let token = match c {
            '{' => {
                bump!();
                Token::LBrace
            }
            '}' => {
                bump!();
                Token::RBrace
            }
            ',' => {
                bump!();
                Token::Comma
            }
            ';' | '∪' => {
                bump!();
                Token::Separator
            }
            '\'' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        Some('\'') => break,
                        Some(ch) => s.push(ch),
                        None => {
                            return Err(QueryError::Syntax {
                                line,
                                col,
                                expected: "closing `'`".into(),
                                found: "end of input".into(),
                            })
                        }
                    }
                }
                Token::Quoted(s)
            }
            _ if is_bare_char(c) => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if is_bare_char(ch) {
                        s.push(ch);
                        bump!();
                    } else {
                        break;
                    }
                }
                match s.parse::<usize>() {
                    Ok(n) => Token::Int(n),
                    Err(_) => Token::Bare(s),
                }
            }
            other => {
                return Err(QueryError::Syntax {
                    line,
                    col,
                    expected: "`{`, `}`, `,`, `;`, `∪`, a quoted atom, or a bare atom".into(),
                    found: other.to_string(),
                })
            }
        };
        tokens.push(Positioned { token, line: tok_line, col: tok_col });
    }
    Ok(tokens)
}

/// One raw atom of a clause, before name resolution.
#[derive(Debug, Clone, PartialEq)]
pub(super) enum Atom {
    Quoted(String),
    Bare(String),
    Int(usize),
}

struct RawClause {
    atoms: Vec<Atom>,
    line: usize,
    col: usize,
}

fn syntax_error(at: Option<&Positioned>, expected: &str) -> QueryError {
    match at {
        Some(p) => QueryError::Syntax {
            line: p.line,
            col: p.col,
            expected: expected.to_string(),
            found: p.token.to_string(),
        },
        None => QueryError::Syntax {
            line: 0,
            col: 0,
            expected: expected.to_string(),
            found: "end of input".to_string(),
        },
    }
}

fn parse_raw(tokens: &[Positioned]) -> Result<Vec<RawClause>, QueryError> {
    // Optional outer braces around the whole list.
    let mut tokens = tokens;
    if tokens.len() >= 2
        && tokens[0].token == Token::LBrace
        && tokens[1].token == Token::LBrace
    {
        if tokens.last().map(|p| &p.token) != Some(&Token::RBrace) {
            return Err(syntax_error(tokens.last(), "`}` closing the outer brace"));
        }
        tokens = &tokens[1..tokens.len() - 1];
    }

    let mut clauses = Vec::new();
    let mut i = 0;
    loop {
        match tokens.get(i) {
            Some(p) if p.token == Token::LBrace => {
                let (line, col) = (p.line, p.col);
                i += 1;
                let mut atoms = Vec::new();
                let mut expect_atom = true;
                loop {
                    match tokens.get(i) {
                        Some(p) if p.token == Token::RBrace => {
                            if expect_atom && !atoms.is_empty() {
                                return Err(syntax_error(Some(p), "an atom after `,`"));
                            }
                            i += 1;
                            break;
                        }
                        Some(p) if p.token == Token::Comma => {
                            if expect_atom {
                                return Err(syntax_error(Some(p), "an atom"));
                            }
                            expect_atom = true;
                            i += 1;
                        }
                        Some(p) if expect_atom => {
                            let atom = match &p.token {
                                Token::Quoted(s) => Atom::Quoted(s.clone()),
                                Token::Bare(s) => Atom::Bare(s.clone()),
                                Token::Int(n) => Atom::Int(*n),
                                _ => return Err(syntax_error(Some(p), "an atom")),
                            };
                            atoms.push(atom);
                            expect_atom = false;
                            i += 1;
                        }
                        Some(p) => return Err(syntax_error(Some(p), "`,` or `}`")),
                        None => return Err(syntax_error(None, "`}`")),
                    }
                }
                clauses.push(RawClause { atoms, line, col });
            }
            Some(p) => return Err(syntax_error(Some(p), "`{` starting a clause")),
            None => break,
        }
        match tokens.get(i) {
            Some(p) if p.token == Token::Separator => {
                i += 1;
            }
            Some(p) => return Err(syntax_error(Some(p), "`;` or `∪` between clauses")),
            None => break,
        }
    }
    if clauses.is_empty() {
        return Err(syntax_error(None, "at least one clause"));
    }
    Ok(clauses)
}

fn bare(atom: &Atom) -> Option<&str> {
    match atom {
        Atom::Bare(s) => Some(s),
        _ => None,
    }
}

fn atom_text(atom: &Atom) -> String {
    match atom {
        Atom::Quoted(s) | Atom::Bare(s) => s.clone(),
        Atom::Int(n) => n.to_string(),
    }
}

/// Parse and validate: every clause command known, out names unique, every
/// consumed set produced, dataflow acyclic.
pub fn parse_query(text: &str) -> Result<QueryAst, QueryError> {
    let tokens = tokenize(text)?;
    let raw = parse_raw(&tokens)?;

    // First pass: collect out names. The out name is the last atom for list
    // and infer clauses; for search it is the last bare atom before an
    // optional trailing integer.
    let mut outs: Vec<String> = Vec::new();
    for clause in &raw {
        if clause.atoms.len() < 2 {
            return Err(QueryError::ClauseArity {
                clause: format!("line {}, col {}", clause.line, clause.col),
                reason: "a clause needs a command and at least one argument".into(),
            });
        }
        let last = clause.atoms.len() - 1;
        let out_atom =
            if matches!(clause.atoms[last], Atom::Int(_)) && clause.atoms.len() >= 3 {
                &clause.atoms[last - 1]
            } else {
                &clause.atoms[last]
            };
        outs.push(atom_text(out_atom));
    }
    for (i, name) in outs.iter().enumerate() {
        if outs[..i].contains(name) {
            return Err(QueryError::DuplicateSetName { name: name.clone() });
        }
    }

    let produced: Vec<String> = outs.clone();
    let mut clauses = Vec::new();
    for (raw_clause, out) in raw.iter().zip(outs) {
        let command = bare(&raw_clause.atoms[0]).unwrap_or("").to_string();
        let args = &raw_clause.atoms[1..];
        let kind = match command.as_str() {
            "search" => parse_search(args, raw_clause)?,
            "list" => parse_list(args, &produced, raw_clause)?,
            "infer" => parse_infer(args, &produced, raw_clause)?,
            other => return Err(QueryError::UnknownCommand { command: other.to_string() }),
        };
        clauses.push(Clause { kind, out });
    }

    let ast = QueryAst { clauses };
    ast.validate()?;
    Ok(ast)
}

fn parse_search(args: &[Atom], raw: &RawClause) -> Result<ClauseKind, QueryError> {
    let arity = || QueryError::ClauseArity {
        clause: format!("search at line {}, col {}", raw.line, raw.col),
        reason: "expected {search, <seed>[, <class>], <Out>[, <k>]}".into(),
    };
    if args.len() < 2 {
        return Err(arity());
    }
    let seed = atom_text(&args[0]);
    let mut rest = &args[1..];
    let mut k = None;
    if let Atom::Int(n) = rest[rest.len() - 1] {
        k = Some(n);
        rest = &rest[..rest.len() - 1];
    }
    let (class_filter, out_atom) = match rest {
        [out] => (ClassFilter::SeedClass, out),
        [class, out] => {
            let text = atom_text(class);
            let filter = if text == "*" {
                ClassFilter::Unfiltered
            } else {
                ClassFilter::Named(text)
            };
            (filter, out)
        }
        _ => return Err(arity()),
    };
    let Atom::Bare(out) = out_atom else { return Err(arity()) };
    let _ = out;
    Ok(ClauseKind::Search { seed, class_filter, k })
}

fn parse_list(args: &[Atom], produced: &[String], raw: &RawClause) -> Result<ClauseKind, QueryError> {
    let arity = || QueryError::ClauseArity {
        clause: format!("list at line {}, col {}", raw.line, raw.col),
        reason: "expected {list, <relation>, <subject>, <Out>}".into(),
    };
    let [relation, subject, out] = args else { return Err(arity()) };
    let Atom::Bare(out) = out else { return Err(arity()) };
    let subject = match subject {
        Atom::Quoted(s) => SubjectArg::Entity(s.clone()),
        Atom::Bare(s) if produced.contains(s) => SubjectArg::Set(s.clone()),
        Atom::Bare(s) => SubjectArg::Entity(s.clone()),
        Atom::Int(_) => return Err(arity()),
    };
    let _ = out;
    Ok(ClauseKind::List { relation: atom_text(relation), subject })
}

fn parse_infer(args: &[Atom], produced: &[String], raw: &RawClause) -> Result<ClauseKind, QueryError> {
    let arity = || QueryError::ClauseArity {
        clause: format!("infer at line {}, col {}", raw.line, raw.col),
        reason: "expected {infer, [rule,] <args...>, <out>}".into(),
    };
    if args.len() < 2 {
        return Err(arity());
    }
    let Atom::Bare(_) = args[args.len() - 1] else { return Err(arity()) };
    let mut rule = None;
    let mut body = &args[..args.len() - 1];
    if let Some(first) = bare(&body[0]) {
        if !produced.contains(&first.to_string()) {
            rule = Some(first.to_string());
            body = &body[1..];
        }
    }
    let mut infer_args = Vec::new();
    for atom in body {
        match atom {
            Atom::Quoted(s) => infer_args.push(InferArg::Entity(s.clone())),
            Atom::Bare(s) if produced.contains(s) => infer_args.push(InferArg::Set(s.clone())),
            Atom::Bare(s) => return Err(QueryError::UnboundSetName { name: s.clone() }),
            Atom::Int(_) => return Err(arity()),
        }
    }
    Ok(ClauseKind::Infer { rule, args: infer_args })
}

/// Canonical text form; `parse(print(ast))` equals `ast`.
pub fn print_query(ast: &QueryAst) -> String {
    let clauses: Vec<String> = ast
        .clauses
        .iter()
        .map(|c| {
            let mut parts = Vec::new();
            match &c.kind {
                ClauseKind::Search { seed, class_filter, k, .. } => {
                    parts.push("search".to_string());
                    parts.push(format!("'{seed}'"));
                    match class_filter {
                        ClassFilter::SeedClass => {}
                        ClassFilter::Unfiltered => parts.push("*".to_string()),
                        ClassFilter::Named(name) => parts.push(name.clone()),
                    }
                    parts.push(c.out.clone());
                    if let Some(k) = k {
                        parts.push(k.to_string());
                    }
                }
                ClauseKind::List { relation, subject, .. } => {
                    parts.push("list".to_string());
                    parts.push(relation.clone());
                    match subject {
                        SubjectArg::Entity(e) => parts.push(format!("'{e}'")),
                        SubjectArg::Set(s) => parts.push(s.clone()),
                    }
                    parts.push(c.out.clone());
                }
                ClauseKind::Infer { rule, args, .. } => {
                    parts.push("infer".to_string());
                    if let Some(rule) = rule {
                        parts.push(rule.clone());
                    }
                    for arg in args {
                        match arg {
                            InferArg::Set(s) => parts.push(s.clone()),
                            InferArg::Entity(e) => parts.push(format!("'{e}'")),
                        }
                    }
                    parts.push(c.out.clone());
                }
            }
            format!("{{{}}}", parts.join(", "))
        })
        .collect();
    clauses.join(" ; ")
}
