//! Recursive-descent parser for the ASCII formula grammar.
//!
//! ```text
//! phi  ::= atom | "true" | "false" | "(" phi ")" | "!" phi
//!        | phi "&" phi | phi "|" phi | phi "->" phi     (! > & > | > ->)
//!        | "R_" ident "(" phi ")" | "R_" ident "(" phi "||" atom ")"
//!        | "K_" ident phi | "<K_" ident ">" phi
//!        | "r^" nat "(" phi "||" atom ")"
//!        | "<K_" ident ">^" nat phi
//! atom ::= "[" nat "]" | "[>" nat "]" | "true"
//! ```
//!
//! Inside the parentheses of `R_i(..)` and `r^n(..)` a top-level `|` is read
//! as the condition bar, exactly like `||`; a disjunctive body has to be
//! parenthesized. `[>n]` abbreviates the disjunction of all heights above `n`
//! up to the ceiling given in [`FormulaParser::height_ceiling`].

use thiserror::Error;

use super::{expand_diamond_chain, expand_iter_reason, AgentId, Atom, Formula, FormulaError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    UnexpectedToken { expected: String, found: String },
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEnd(String),
    #[error("restricted condition: only `true` or a height atom may appear as a condition")]
    RestrictedCondition,
    #[error("number out of range")]
    NumberTooLarge,
    #[error("{0} needs the agent set of the model")]
    MissingAgents(&'static str),
    #[error("[>{0}] needs a height ceiling")]
    MissingHeightCeiling(u64),
    #[error("agent {0} is not declared")]
    UndeclaredAgent(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Parses with no agent set and no height ceiling.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    FormulaParser::default().parse(text)
}

/// Parser configuration: the agent set expands `r^n` and `<K_i>^n`, and the
/// height ceiling bounds `[>n]`.
#[derive(Debug, Clone, Default)]
pub struct FormulaParser {
    agents: Option<Vec<AgentId>>,
    height_ceiling: Option<u64>,
    heights: Option<Vec<u64>>,
}

impl FormulaParser {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares the agent set. Agents occurring in the text must belong to it.
    pub fn agents(mut self, agents: &[AgentId]) -> Self {
        self.agents = Some(agents.to_vec());
        self
    }

    pub fn height_ceiling(mut self, max: u64) -> Self {
        self.height_ceiling = Some(max);
        self
    }

    /// Restricts `[>n]` to the given heights, for models whose valuation
    /// mentions only some heights. Takes precedence over the ceiling.
    pub fn heights(mut self, heights: impl IntoIterator<Item = u64>) -> Self {
        let mut hs: Vec<u64> = heights.into_iter().collect();
        hs.sort_unstable();
        hs.dedup();
        self.heights = Some(hs);
        self
    }

    pub fn parse(&self, text: &str) -> Result<Formula, ParseError> {
        let tokens = lex(text)?;
        let mut p = Parser {
            cfg: self,
            tokens,
            pos: 0,
            end: end_position(text),
        };
        let f = p.implication(false)?;
        if let Some(tok) = p.peek() {
            return Err(p.error_at(
                tok,
                ParseErrorKind::UnexpectedToken {
                    expected: "end of input".into(),
                    found: tok.kind.describe(),
                },
            ));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokenKind {
    Height(u64),
    Above(u64),
    True,
    False,
    Reason(String),
    Know(String),
    Diamond(String, Option<u64>),
    Iter(u64),
    LParen,
    RParen,
    Not,
    And,
    Bar,
    DoubleBar,
    Arrow,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Height(n) => format!("`[{n}]`"),
            TokenKind::Above(n) => format!("`[>{n}]`"),
            TokenKind::True => "`true`".into(),
            TokenKind::False => "`false`".into(),
            TokenKind::Reason(a) => format!("`R_{a}`"),
            TokenKind::Know(a) => format!("`K_{a}`"),
            TokenKind::Diamond(a, None) => format!("`<K_{a}>`"),
            TokenKind::Diamond(a, Some(n)) => format!("`<K_{a}>^{n}`"),
            TokenKind::Iter(n) => format!("`r^{n}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Not => "`!`".into(),
            TokenKind::And => "`&`".into(),
            TokenKind::Bar => "`|`".into(),
            TokenKind::DoubleBar => "`||`".into(),
            TokenKind::Arrow => "`->`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    line: usize,
    column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            kind,
        }
    }

    fn expect(&mut self, want: char, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.err(ParseErrorKind::UnexpectedToken {
                expected: what.into(),
                found: format!("{c:?}"),
            })),
            None => Err(self.err(ParseErrorKind::UnexpectedEnd(what.into()))),
        }
    }

    fn nat(&mut self) -> Result<u64, ParseError> {
        let mut digits = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            digits.push(c);
            self.bump();
        }
        if digits.is_empty() {
            return match self.peek() {
                Some(c) => Err(self.err(ParseErrorKind::UnexpectedToken {
                    expected: "a natural number".into(),
                    found: format!("{c:?}"),
                })),
                None => Err(self.err(ParseErrorKind::UnexpectedEnd("a natural number".into()))),
            };
        }
        digits
            .parse()
            .map_err(|_| self.err(ParseErrorKind::NumberTooLarge))
    }

    fn word(&mut self) -> String {
        let mut w = String::new();
        while let Some(c) = self.peek().filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
            w.push(c);
            self.bump();
        }
        w
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let (line, column) = (cur.line, cur.column);
        let kind = match c {
            '(' => {
                cur.bump();
                TokenKind::LParen
            }
            ')' => {
                cur.bump();
                TokenKind::RParen
            }
            '!' => {
                cur.bump();
                TokenKind::Not
            }
            '&' => {
                cur.bump();
                TokenKind::And
            }
            '|' => {
                cur.bump();
                if cur.peek() == Some('|') {
                    cur.bump();
                    TokenKind::DoubleBar
                } else {
                    TokenKind::Bar
                }
            }
            '-' => {
                cur.bump();
                cur.expect('>', "`->`")?;
                TokenKind::Arrow
            }
            '[' => {
                cur.bump();
                let above = cur.peek() == Some('>');
                if above {
                    cur.bump();
                }
                let n = cur.nat()?;
                cur.expect(']', "`]`")?;
                if above {
                    TokenKind::Above(n)
                } else {
                    TokenKind::Height(n)
                }
            }
            '<' => {
                cur.bump();
                let w = cur.word();
                let Some(agent) = w.strip_prefix("K_") else {
                    return Err(ParseError {
                        line,
                        column,
                        kind: ParseErrorKind::UnexpectedToken {
                            expected: "`<K_agent>`".into(),
                            found: format!("`<{w}`"),
                        },
                    });
                };
                let agent = agent.to_string();
                cur.expect('>', "`>`")?;
                let power = if cur.peek() == Some('^') {
                    cur.bump();
                    Some(cur.nat()?)
                } else {
                    None
                };
                TokenKind::Diamond(agent, power)
            }
            c if c.is_ascii_alphabetic() => {
                let w = cur.word();
                if w == "true" {
                    TokenKind::True
                } else if w == "false" {
                    TokenKind::False
                } else if w == "r" && cur.peek() == Some('^') {
                    cur.bump();
                    TokenKind::Iter(cur.nat()?)
                } else if let Some(agent) = w.strip_prefix("R_") {
                    TokenKind::Reason(agent.to_string())
                } else if let Some(agent) = w.strip_prefix("K_") {
                    TokenKind::Know(agent.to_string())
                } else {
                    return Err(ParseError {
                        line,
                        column,
                        kind: ParseErrorKind::UnexpectedToken {
                            expected: "a formula".into(),
                            found: format!("`{w}`"),
                        },
                    });
                }
            }
            other => return Err(cur.err(ParseErrorKind::UnexpectedChar(other))),
        };
        out.push(Token { kind, line, column });
    }
    Ok(out)
}

fn end_position(text: &str) -> (usize, usize) {
    let line = 1 + text.matches('\n').count();
    let column = 1 + text.rsplit('\n').next().map_or(0, |l| l.chars().count());
    (line, column)
}

struct Parser<'a> {
    cfg: &'a FormulaParser,
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: tok.line,
            column: tok.column,
            kind,
        }
    }

    fn error_end(&self, expected: &str) -> ParseError {
        ParseError {
            line: self.end.0,
            column: self.end.1,
            kind: ParseErrorKind::UnexpectedEnd(expected.into()),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().is_some_and(|t| &t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(self.error_at(
                &t,
                ParseErrorKind::UnexpectedToken {
                    expected: kind.describe(),
                    found: t.kind.describe(),
                },
            )),
            None => Err(self.error_end(&kind.describe())),
        }
    }

    /// `bar_is_condition` is set directly inside `R_i(..)`/`r^n(..)`, where
    /// a top-level `|` separates body and condition.
    fn implication(&mut self, bar_is_condition: bool) -> Result<Formula, ParseError> {
        let lhs = self.disjunction(bar_is_condition)?;
        if self.eat(&TokenKind::Arrow) {
            let rhs = self.implication(bar_is_condition)?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self, bar_is_condition: bool) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while !bar_is_condition && self.eat(&TokenKind::Bar) {
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&TokenKind::And) {
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn agent(&self, tok: &Token, name: &str) -> Result<AgentId, ParseError> {
        let agent = AgentId::new(name).map_err(|e| self.error_at(tok, e.into()))?;
        if let Some(agents) = &self.cfg.agents {
            if !agents.contains(&agent) {
                return Err(self.error_at(tok, ParseErrorKind::UndeclaredAgent(name.into())));
            }
        }
        Ok(agent)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_end("a formula"));
        };
        match &tok.kind {
            TokenKind::Not => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            TokenKind::Know(name) => {
                self.pos += 1;
                let agent = self.agent(&tok, name)?;
                Ok(Formula::know(agent, self.unary()?))
            }
            TokenKind::Diamond(name, power) => {
                self.pos += 1;
                let agent = self.agent(&tok, name)?;
                let body = self.unary()?;
                match power {
                    None => Ok(Formula::diamond(agent, body)),
                    Some(n) => {
                        let agents = self.cfg.agents.as_deref().ok_or_else(|| {
                            self.error_at(&tok, ParseErrorKind::MissingAgents("<K_i>^n"))
                        })?;
                        expand_diamond_chain(&agent, *n as usize, &body, agents)
                            .map_err(|e| self.error_at(&tok, e.into()))
                    }
                }
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        let Some(tok) = self.next() else {
            return Err(self.error_end("a formula"));
        };
        match &tok.kind {
            TokenKind::Height(n) => Ok(Formula::height(*n)),
            TokenKind::Above(n) => self.above(&tok, *n),
            TokenKind::True => Ok(Formula::top()),
            TokenKind::False => Ok(Formula::bottom()),
            TokenKind::LParen => {
                let f = self.implication(false)?;
                self.expect(TokenKind::RParen)?;
                Ok(f)
            }
            TokenKind::Reason(name) => {
                let agent = self.agent(&tok, name)?;
                self.expect(TokenKind::LParen)?;
                let body = self.implication(true)?;
                let cond = if self.eat(&TokenKind::DoubleBar) || self.eat(&TokenKind::Bar) {
                    self.condition()?
                } else {
                    Atom::Top
                };
                self.expect(TokenKind::RParen)?;
                Ok(Formula::reason(agent, body, cond))
            }
            TokenKind::Iter(n) => {
                let agents = self
                    .cfg
                    .agents
                    .clone()
                    .ok_or_else(|| self.error_at(&tok, ParseErrorKind::MissingAgents("r^n")))?;
                self.expect(TokenKind::LParen)?;
                let body = self.implication(true)?;
                if !(self.eat(&TokenKind::DoubleBar) || self.eat(&TokenKind::Bar)) {
                    return match self.peek() {
                        Some(t) => Err(self.error_at(
                            t,
                            ParseErrorKind::UnexpectedToken {
                                expected: "`||`".into(),
                                found: t.kind.describe(),
                            },
                        )),
                        None => Err(self.error_end("`||`")),
                    };
                }
                let cond = self.condition()?;
                self.expect(TokenKind::RParen)?;
                expand_iter_reason(*n as usize, &body, cond, &agents)
                    .map_err(|e| self.error_at(&tok, e.into()))
            }
            other => Err(self.error_at(
                &tok,
                ParseErrorKind::UnexpectedToken {
                    expected: "a formula".into(),
                    found: other.describe(),
                },
            )),
        }
    }

    /// Parses a whole formula in the condition slot and rejects anything that
    /// is not a single atom.
    fn condition(&mut self) -> Result<Atom, ParseError> {
        let Some(start) = self.peek().cloned() else {
            return Err(self.error_end("a condition atom"));
        };
        match self.implication(false)? {
            Formula::Atom(a) => Ok(a),
            _ => Err(self.error_at(&start, ParseErrorKind::RestrictedCondition)),
        }
    }

    fn above(&self, tok: &Token, n: u64) -> Result<Formula, ParseError> {
        if let Some(hs) = &self.cfg.heights {
            return Ok(Formula::any_height(hs.iter().copied().filter(|&h| h > n)));
        }
        let max = self
            .cfg
            .height_ceiling
            .ok_or_else(|| self.error_at(tok, ParseErrorKind::MissingHeightCeiling(n)))?;
        Ok(Formula::any_height(n.saturating_add(1)..=max))
    }
}
