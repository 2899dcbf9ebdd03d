//! BNF grammars with ordered production choices.
//!
//! The accepted text format is the one used by the bundled grammar assets:
//!
//! ```text
//! N = {func, ...}                      (optional, ignored)
//! I    <func> ::= <exprgluc> + <exprch> - <exprins>
//! II   <exprgluc> ::= <preop> (<gluc>)
//!         |(<cte> <op> <gluc>)
//!         |<gluc>
//! III  <gluc> ::= #{GL[k_<idx>]}|#{K}
//! ```
//!
//! Rule labels (roman numerals) and `N=`/`T=`/`S=`/`P=` header lines are
//! skipped. A line that does not open a new rule continues the previous one.
//! The first rule defines the start symbol.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: syntax error: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("rule <{name}> is defined twice (line {line})")]
    DuplicateRule { name: String, line: usize },
    #[error("non-terminal <{name}> has no rule (referenced on line {line})")]
    UnknownNonTerminal { name: String, line: usize },
}

/// Series a variable-reference terminal can name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarName {
    GL,
    CH,
    IS,
    IL,
    K,
}

impl VarName {
    pub fn as_str(self) -> &'static str {
        match self {
            VarName::GL => "GL",
            VarName::CH => "CH",
            VarName::IS => "IS",
            VarName::IL => "IL",
            VarName::K => "K",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "GL" => VarName::GL,
            "CH" => VarName::CH,
            "IS" => VarName::IS,
            "IL" => VarName::IL,
            "K" => VarName::K,
            _ => return None,
        })
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymbolKind {
    Terminal(String),
    /// Index into [`Grammar::rules`].
    NonTerminal(usize),
    /// `#{NAME[k_...]}` or `#{K}`. The symbols between `k_` and `]` form the
    /// lag index and may contain non-terminals that the mapper still expands.
    Variable {
        name: VarName,
        index: Option<Vec<Symbol>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub kind: SymbolKind,
    /// Whitespace preceded this symbol inside its choice in the source text.
    pub spaced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub symbols: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub choices: Vec<Choice>,
}

/// A parsed grammar `{N, T, P, S}`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    rules: Vec<Rule>,
    by_name: HashMap<String, usize>,
    terminals: BTreeSet<String>,
    start: usize,
}

impl Grammar {
    pub fn parse(source: &str) -> Result<Self, GrammarError> {
        parse_grammar(source)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: usize) -> &Rule {
        &self.rules[id]
    }

    pub fn rule_id(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn start_symbol(&self) -> &str {
        &self.rules[self.start].name
    }

    pub fn start_id(&self) -> usize {
        self.start
    }

    pub fn non_terminals(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.name.as_str())
    }

    pub fn terminals(&self) -> &BTreeSet<String> {
        &self.terminals
    }

    /// Number of choices in the rule for `nt`.
    pub fn choice_count(&self, nt: &str) -> Result<usize, GrammarError> {
        self.rule_id(nt)
            .map(|id| self.rules[id].choices.len())
            .ok_or_else(|| GrammarError::UnknownNonTerminal {
                name: nt.to_string(),
                line: 0,
            })
    }

    /// Canonical text: one rule per line, choices separated by ` | `.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push('<');
            out.push_str(&rule.name);
            out.push_str("> ::= ");
            for (i, choice) in rule.choices.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                self.write_symbols(&choice.symbols, &mut out);
            }
            out.push('\n');
        }
        out
    }

    fn write_symbols(&self, symbols: &[Symbol], out: &mut String) {
        for (i, sym) in symbols.iter().enumerate() {
            if i > 0 && sym.spaced {
                out.push(' ');
            }
            match &sym.kind {
                SymbolKind::Terminal(t) => out.push_str(t),
                SymbolKind::NonTerminal(id) => {
                    out.push('<');
                    out.push_str(&self.rules[*id].name);
                    out.push('>');
                }
                SymbolKind::Variable { name, index } => {
                    out.push_str("#{");
                    out.push_str(name.as_str());
                    if let Some(index) = index {
                        out.push_str("[k_");
                        self.write_symbols(index, out);
                        out.push(']');
                    }
                    out.push('}');
                }
            }
        }
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

/// Parse BNF text into a validated [`Grammar`].
pub fn parse_grammar(source: &str) -> Result<Grammar, GrammarError> {
    let raw_rules = split_rules(source)?;
    if raw_rules.is_empty() {
        return Err(GrammarError::SyntaxError {
            line: 1,
            message: "no rules found".into(),
        });
    }

    let mut by_name = HashMap::new();
    for (idx, raw) in raw_rules.iter().enumerate() {
        if by_name.insert(raw.name.clone(), idx).is_some() {
            return Err(GrammarError::DuplicateRule {
                name: raw.name.clone(),
                line: raw.line,
            });
        }
    }

    let mut rules = Vec::with_capacity(raw_rules.len());
    let mut terminals = BTreeSet::new();
    for raw in &raw_rules {
        let mut choices = Vec::new();
        for alt in split_alternatives(&raw.body) {
            let tokens = tokenize(alt, raw.line)?;
            if tokens.is_empty() {
                return Err(GrammarError::SyntaxError {
                    line: raw.line,
                    message: format!("empty choice in rule <{}>", raw.name),
                });
            }
            let symbols = resolve(tokens, &by_name, &mut terminals, raw.line)?;
            choices.push(Choice { symbols });
        }
        rules.push(Rule {
            name: raw.name.clone(),
            choices,
        });
    }

    Ok(Grammar {
        rules,
        by_name,
        terminals,
        start: 0,
    })
}

struct RawRule {
    name: String,
    body: String,
    line: usize,
}

fn is_header_line(line: &str) -> bool {
    let mut chars = line.trim_start().chars();
    matches!(chars.next(), Some('N' | 'T' | 'S' | 'P'))
        && chars.as_str().trim_start().starts_with('=')
}

/// Strip an optional roman-numeral label in front of `<lhs>`.
fn strip_label(line: &str) -> &str {
    let t = line.trim_start();
    let label_len = t
        .find(|c: char| !matches!(c, 'I' | 'V' | 'X' | 'L' | 'C'))
        .unwrap_or(t.len());
    if label_len > 0 {
        let rest = &t[label_len..];
        if rest.starts_with(char::is_whitespace) && rest.trim_start().starts_with('<') {
            return rest.trim_start();
        }
    }
    t
}

fn split_rules(source: &str) -> Result<Vec<RawRule>, GrammarError> {
    let mut rules: Vec<RawRule> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || is_header_line(line) {
            continue;
        }
        let stripped = strip_label(line);
        if let Some(def) = stripped.find("::=") {
            let lhs = stripped[..def].trim();
            let name = lhs
                .strip_prefix('<')
                .and_then(|s| s.strip_suffix('>'))
                .filter(|n| is_nt_name(n))
                .ok_or_else(|| GrammarError::SyntaxError {
                    line: lineno,
                    message: format!("left-hand side `{lhs}` is not a non-terminal"),
                })?;
            rules.push(RawRule {
                name: name.to_string(),
                body: stripped[def + 3..].to_string(),
                line: lineno,
            });
        } else if let Some(last) = rules.last_mut() {
            last.body.push(' ');
            last.body.push_str(line);
        } else {
            return Err(GrammarError::SyntaxError {
                line: lineno,
                message: "text before the first rule".into(),
            });
        }
    }
    Ok(rules)
}

fn split_alternatives(body: &str) -> impl Iterator<Item = &str> {
    body.split('|')
}

fn is_nt_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[derive(Debug)]
enum Token {
    Terminal(String),
    NonTerminal(String),
    Variable {
        name: VarName,
        index: Option<Vec<(Token, bool)>>,
    },
}

/// Tokenize one choice. Each token carries its "preceded by whitespace" flag.
fn tokenize(text: &str, line: usize) -> Result<Vec<(Token, bool)>, GrammarError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut out = Vec::new();
    let mut spaced = false;
    while pos < chars.len() {
        let c = chars[pos];
        if c.is_whitespace() {
            spaced = true;
            pos += 1;
            continue;
        }
        let token = if c == '<' {
            match non_terminal_at(&chars, pos) {
                Some((name, end)) => {
                    pos = end;
                    Token::NonTerminal(name)
                }
                None => {
                    pos += 1;
                    Token::Terminal("<".into())
                }
            }
        } else if c == '#' && chars.get(pos + 1) == Some(&'{') {
            let close = chars[pos..]
                .iter()
                .position(|&c| c == '}')
                .map(|p| p + pos)
                .ok_or_else(|| GrammarError::SyntaxError {
                    line,
                    message: "unterminated `#{`".into(),
                })?;
            let inner: String = chars[pos + 2..close].iter().collect();
            pos = close + 1;
            variable_token(&inner, line)?
        } else if is_word_char(c) {
            let start = pos;
            while pos < chars.len() && is_word_char(chars[pos]) {
                pos += 1;
            }
            Token::Terminal(chars[start..pos].iter().collect())
        } else {
            pos += 1;
            Token::Terminal(c.to_string())
        };
        out.push((token, spaced && !out.is_empty()));
        spaced = false;
    }
    Ok(out)
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn non_terminal_at(chars: &[char], pos: usize) -> Option<(String, usize)> {
    let close = chars[pos + 1..].iter().position(|&c| c == '>')? + pos + 1;
    let name: String = chars[pos + 1..close].iter().collect();
    is_nt_name(&name).then_some((name, close + 1))
}

fn variable_token(inner: &str, line: usize) -> Result<Token, GrammarError> {
    let bad = |message: String| GrammarError::SyntaxError { line, message };
    let inner = inner.trim();
    let (name_text, index_text) = match inner.find('[') {
        Some(open) => {
            let rest = inner[open + 1..]
                .strip_suffix(']')
                .ok_or_else(|| bad(format!("variable `#{{{inner}}}` lacks a closing `]`")))?;
            let index = rest
                .strip_prefix("k_")
                .ok_or_else(|| bad(format!("variable index `{rest}` must start with `k_`")))?;
            (&inner[..open], Some(index))
        }
        None => (inner, None),
    };
    let name = VarName::parse(name_text.trim())
        .ok_or_else(|| bad(format!("unknown variable `{name_text}`")))?;
    match (name, index_text) {
        (VarName::K, None) => Ok(Token::Variable { name, index: None }),
        (VarName::K, Some(_)) => Err(bad("`K` takes no index".into())),
        (_, None) => Err(bad(format!("variable `{name}` needs an index `[k_..]`"))),
        (_, Some(index)) => {
            let tokens = tokenize(index, line)?;
            if tokens.is_empty() {
                return Err(bad(format!("variable `{name}` has an empty index")));
            }
            Ok(Token::Variable {
                name,
                index: Some(tokens),
            })
        }
    }
}

fn resolve(
    tokens: Vec<(Token, bool)>,
    by_name: &HashMap<String, usize>,
    terminals: &mut BTreeSet<String>,
    line: usize,
) -> Result<Vec<Symbol>, GrammarError> {
    tokens
        .into_iter()
        .map(|(token, spaced)| {
            let kind = match token {
                Token::Terminal(t) => {
                    terminals.insert(t.clone());
                    SymbolKind::Terminal(t)
                }
                Token::NonTerminal(name) => match by_name.get(&name) {
                    Some(&id) => SymbolKind::NonTerminal(id),
                    None => return Err(GrammarError::UnknownNonTerminal { name, line }),
                },
                Token::Variable { name, index } => {
                    terminals.insert(name.as_str().to_string());
                    let index = index
                        .map(|toks| resolve(toks, by_name, terminals, line))
                        .transpose()?;
                    SymbolKind::Variable { name, index }
                }
            };
            Ok(Symbol { kind, spaced })
        })
        .collect()
}
