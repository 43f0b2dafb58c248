use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{looks_like_variable, Edge, Target, UmrGraph};

/// 1-based line and column (in characters) of a token in the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty input")]
    EmptyInput,
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("expected `/` and a concept after the variable")]
    MissingConceptSlash,
    #[error("variable `{0}` is introduced more than once")]
    DuplicateVariable(String),
    #[error("variable `{0}` is referenced but never introduced")]
    DanglingReference(String),
    #[error("unterminated string constant")]
    UnterminatedString,
    #[error("unexpected {0}")]
    UnexpectedToken(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: Position,
}

impl ParseError {
    fn new(kind: ParseErrorKind, position: Position) -> Self {
        Self { kind, position }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Str(String),
    Sym(String),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Open => "`(`".into(),
            Tok::Close => "`)`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Role(r) => format!("role `:{r}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Sym(s) => format!("symbol `{s}`"),
        }
    }
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '/' | '"')
}

fn tokenize(text: &str) -> Result<Vec<(Tok, Position)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut pos = Position { line: 1, column: 1 };

    fn bump(pos: &mut Position, c: char) {
        if c == '\n' {
            pos.line += 1;
            pos.column = 1;
        } else {
            pos.column += 1;
        }
    }

    while let Some(&c) = chars.peek() {
        let start = pos;
        match c {
            c if c.is_whitespace() => {
                chars.next();
                bump(&mut pos, c);
            }
            '(' | ')' | '/' => {
                chars.next();
                bump(&mut pos, c);
                let tok = match c {
                    '(' => Tok::Open,
                    ')' => Tok::Close,
                    _ => Tok::Slash,
                };
                out.push((tok, start));
            }
            '"' => {
                chars.next();
                bump(&mut pos, c);
                let mut value = String::new();
                let mut closed = false;
                while let Some(c) = chars.next() {
                    bump(&mut pos, c);
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => {
                            if let Some(esc) = chars.next() {
                                bump(&mut pos, esc);
                                value.push(esc);
                            }
                        }
                        _ => value.push(c),
                    }
                }
                if !closed {
                    return Err(ParseError::new(ParseErrorKind::UnterminatedString, start));
                }
                out.push((Tok::Str(value), start));
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    // Roles are words starting with ':'; inner colons (12:30) stay put.
                    if is_delim(c) {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    bump(&mut pos, c);
                }
                let tok = match word.strip_prefix(':') {
                    Some("") => {
                        return Err(ParseError::new(
                            ParseErrorKind::UnexpectedToken("empty role label".into()),
                            start,
                        ))
                    }
                    Some(role) => Tok::Role(role.to_string()),
                    None => Tok::Sym(word),
                };
                out.push((tok, start));
            }
        }
    }
    Ok(out)
}

/// Fails with `UnbalancedParens` at the first unmatched parenthesis, if any.
fn check_balance(tokens: &[(Tok, Position)], end: Position) -> Result<(), ParseError> {
    let mut open = Vec::new();
    for (tok, pos) in tokens {
        match tok {
            Tok::Open => open.push(*pos),
            Tok::Close => {
                if open.pop().is_none() {
                    return Err(ParseError::new(ParseErrorKind::UnbalancedParens, *pos));
                }
            }
            _ => {}
        }
    }
    match open.first() {
        Some(_) => Err(ParseError::new(ParseErrorKind::UnbalancedParens, end)),
        None => Ok(()),
    }
}

struct Parser {
    tokens: Vec<(Tok, Position)>,
    at: usize,
    end: Position,
    nodes: BTreeMap<String, String>,
    edges: Vec<Edge>,
    // Bare tokens in value position, resolved once every variable is known.
    unresolved: Vec<(usize, Position)>,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, Position)> {
        self.tokens.get(self.at)
    }

    fn next(&mut self) -> Result<(Tok, Position), ParseError> {
        let item = self
            .tokens
            .get(self.at)
            .cloned()
            .ok_or_else(|| ParseError::new(ParseErrorKind::UnbalancedParens, self.end))?;
        self.at += 1;
        Ok(item)
    }

    fn unexpected(tok: &Tok, pos: Position) -> ParseError {
        ParseError::new(ParseErrorKind::UnexpectedToken(tok.describe()), pos)
    }

    /// Parses `( var / concept (:role value)* )` and returns the variable.
    fn node(&mut self) -> Result<String, ParseError> {
        match self.next()? {
            (Tok::Open, _) => {}
            (tok, pos) => return Err(Self::unexpected(&tok, pos)),
        }
        let (var, var_pos) = match self.next()? {
            (Tok::Sym(v), pos) => (v, pos),
            (Tok::Slash, pos) => {
                return Err(ParseError::new(ParseErrorKind::MissingConceptSlash, pos))
            }
            (tok, pos) => return Err(Self::unexpected(&tok, pos)),
        };
        match self.next()? {
            (Tok::Slash, _) => {}
            (_, pos) => return Err(ParseError::new(ParseErrorKind::MissingConceptSlash, pos)),
        }
        let concept = match self.next()? {
            (Tok::Sym(c), _) => c,
            (_, pos) => return Err(ParseError::new(ParseErrorKind::MissingConceptSlash, pos)),
        };
        if self.nodes.insert(var.clone(), concept).is_some() {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateVariable(var),
                var_pos,
            ));
        }
        loop {
            match self.next()? {
                (Tok::Close, _) => return Ok(var),
                (Tok::Role(role), _) => {
                    let slot = self.edges.len();
                    let target = match self.peek().cloned() {
                        // Reserve the parent edge's slot so edges stay in preorder.
                        Some((Tok::Open, _)) => {
                            self.edges.push(Edge {
                                source: var.clone(),
                                role,
                                target: Target::Node(String::new()),
                            });
                            let child = self.node()?;
                            self.edges[slot].target = Target::Node(child);
                            continue;
                        }
                        Some((Tok::Str(s), _)) => Target::Str(s),
                        Some((Tok::Sym(s), pos)) => {
                            self.unresolved.push((slot, pos));
                            Target::Symbol(s)
                        }
                        Some((tok, pos)) => return Err(Self::unexpected(&tok, pos)),
                        None => {
                            return Err(ParseError::new(ParseErrorKind::UnbalancedParens, self.end))
                        }
                    };
                    self.at += 1;
                    self.edges.push(Edge {
                        source: var.clone(),
                        role,
                        target,
                    });
                }
                (Tok::Slash, pos) => {
                    return Err(ParseError::new(ParseErrorKind::MissingConceptSlash, pos))
                }
                (tok, pos) => return Err(Self::unexpected(&tok, pos)),
            }
        }
    }
}

/// Parses a single parenthesized Penman expression into a graph.
pub fn parse_graph(text: &str) -> Result<UmrGraph, ParseError> {
    let tokens = tokenize(text)?;
    let end = end_position(text);
    if tokens.is_empty() {
        return Err(ParseError::new(ParseErrorKind::EmptyInput, end));
    }
    check_balance(&tokens, end)?;

    let mut parser = Parser {
        tokens,
        at: 0,
        end,
        nodes: BTreeMap::new(),
        edges: Vec::new(),
        unresolved: Vec::new(),
    };
    if parser.peek().map(|t| &t.0) != Some(&Tok::Open) {
        let (tok, pos) = parser.peek().cloned().expect("non-empty");
        return Err(Parser::unexpected(&tok, pos));
    }
    let root = parser.node()?;
    if let Some((tok, pos)) = parser.peek().cloned() {
        return Err(Parser::unexpected(&tok, pos));
    }

    for (idx, pos) in std::mem::take(&mut parser.unresolved) {
        let edge = &mut parser.edges[idx];
        let Target::Symbol(token) = &edge.target else {
            unreachable!("unresolved slot always holds a symbol");
        };
        if parser.nodes.contains_key(token) {
            edge.target = Target::Reference(token.clone());
        } else if looks_like_variable(token) {
            return Err(ParseError::new(
                ParseErrorKind::DanglingReference(token.clone()),
                pos,
            ));
        }
    }

    Ok(UmrGraph::from_parts_unchecked(
        root,
        parser.nodes,
        parser.edges,
    ))
}

fn end_position(text: &str) -> Position {
    let mut pos = Position { line: 1, column: 1 };
    for c in text.chars() {
        if c == '\n' {
            pos.line += 1;
            pos.column = 1;
        } else {
            pos.column += 1;
        }
    }
    pos
}
