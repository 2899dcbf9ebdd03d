//! Genotype to phenotype mapping.
//!
//! The leftmost non-terminal is always expanded next, which is the same as a
//! pre-order, left-to-right expansion of the derivation tree. Every expansion
//! reads one codon (single-choice rules included) and takes choice
//! `codon % choice_count`. When the codons run out the reader restarts at the
//! first codon, at most `max_wraps` times.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Grammar, Symbol, SymbolKind, VarName};

/// Fixed-length integer genotype. `u8` codons give the 256-value codon size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chromosome(Vec<u8>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChromosomeError {
    #[error("a chromosome needs at least one codon")]
    Empty,
    #[error("codon {value} at position {position} is outside 0..=255")]
    OutOfRange { position: usize, value: i64 },
}

impl Chromosome {
    pub fn new(codons: Vec<u8>) -> Result<Self, ChromosomeError> {
        if codons.is_empty() {
            return Err(ChromosomeError::Empty);
        }
        Ok(Chromosome(codons))
    }

    pub fn from_values(values: &[i64]) -> Result<Self, ChromosomeError> {
        let codons = values
            .iter()
            .enumerate()
            .map(|(position, &value)| {
                u8::try_from(value).map_err(|_| ChromosomeError::OutOfRange { position, value })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Chromosome::new(codons)
    }

    pub fn codons(&self) -> &[u8] {
        &self.0
    }

    pub fn codons_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("non-terminals remain after {wraps} wraps ({consumed} codons read)")]
    WrappedOut { wraps: usize, consumed: usize },
    #[error("mapping did not produce a phenotype")]
    NotMapped,
}

/// Node of a derivation tree. Borrowed text points into the grammar.
#[derive(Debug, Clone, PartialEq)]
pub enum Node<'g> {
    Leaf {
        text: &'g str,
        spaced: bool,
    },
    Branch {
        non_terminal: &'g str,
        choice: usize,
        spaced: bool,
        children: Vec<Node<'g>>,
    },
    Variable {
        name: VarName,
        spaced: bool,
        /// `None` for `K`; otherwise the expanded lag digits.
        index: Option<Vec<Node<'g>>>,
    },
}

impl<'g> Node<'g> {
    pub fn spaced(&self) -> bool {
        match self {
            Node::Leaf { spaced, .. } | Node::Branch { spaced, .. } | Node::Variable { spaced, .. } => *spaced,
        }
    }

    /// Concatenated leaf text without spacing.
    pub fn yield_text(&self) -> String {
        let mut out = String::new();
        self.push_yield(&mut out);
        out
    }

    fn push_yield(&self, out: &mut String) {
        match self {
            Node::Leaf { text, .. } => out.push_str(text),
            Node::Branch { children, .. } => children.iter().for_each(|c| c.push_yield(out)),
            Node::Variable { name, index, .. } => push_variable(*name, index.as_deref(), out),
        }
    }
}

fn push_variable(name: VarName, index: Option<&[Node<'_>]>, out: &mut String) {
    out.push_str(name.as_str());
    if let Some(index) = index {
        out.push_str("[k_");
        index.iter().for_each(|n| n.push_yield(out));
        out.push(']');
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivationTree<'g> {
    pub root: Node<'g>,
}

impl DerivationTree<'_> {
    /// Leaves left to right with canonical spacing.
    pub fn phenotype_text(&self) -> String {
        let mut out = String::new();
        let mut pending = false;
        write_spaced(&self.root, &mut out, &mut pending);
        out
    }
}

fn write_spaced(node: &Node<'_>, out: &mut String, pending: &mut bool) {
    if node.spaced() {
        *pending = true;
    }
    match node {
        Node::Leaf { text, .. } => emit(text, out, pending),
        Node::Branch { children, .. } => children.iter().for_each(|c| write_spaced(c, out, pending)),
        Node::Variable { name, index, .. } => {
            let mut text = String::new();
            push_variable(*name, index.as_deref(), &mut text);
            emit(&text, out, pending);
        }
    }
}

fn emit(text: &str, out: &mut String, pending: &mut bool) {
    if *pending && !out.is_empty() {
        let prev = out.chars().next_back().unwrap_or(' ');
        let next = text.chars().next().unwrap_or(' ');
        let glued = prev == '('
            || next == ')'
            || (next == '(' && (prev.is_alphanumeric() || prev == '_'));
        if !glued {
            out.push(' ');
        }
    }
    *pending = false;
    out.push_str(text);
}

/// One line of the mapping trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expansion<'g> {
    pub step: usize,
    pub codon_index: usize,
    pub codon_value: u8,
    pub non_terminal: &'g str,
    pub n_choices: usize,
    pub chosen: usize,
}

impl fmt::Display for Expansion<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {}, {}, {}, {}",
            self.step, self.codon_index, self.codon_value, self.non_terminal, self.n_choices, self.chosen
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingOutcome<'g> {
    pub result: Result<DerivationTree<'g>, MapError>,
    pub codons_consumed: usize,
    pub wraps_used: usize,
    /// Filled only by [`map_genotype_traced`].
    pub trace: Vec<Expansion<'g>>,
}

impl<'g> MappingOutcome<'g> {
    pub fn is_success(&self) -> bool {
        self.result.is_ok()
    }

    pub fn tree(&self) -> Option<&DerivationTree<'g>> {
        self.result.as_ref().ok()
    }

    pub fn phenotype_text(&self) -> Result<String, MapError> {
        match &self.result {
            Ok(tree) => Ok(tree.phenotype_text()),
            Err(_) => Err(MapError::NotMapped),
        }
    }
}

struct CodonReader<'c, 'g> {
    codons: &'c [u8],
    position: usize,
    consumed: usize,
    wraps: usize,
    max_wraps: usize,
    trace: Option<Vec<Expansion<'g>>>,
}

impl<'g> CodonReader<'_, 'g> {
    fn choose(&mut self, non_terminal: &'g str, n_choices: usize) -> Result<usize, MapError> {
        if self.position == self.codons.len() {
            if self.wraps == self.max_wraps {
                return Err(MapError::WrappedOut {
                    wraps: self.wraps,
                    consumed: self.consumed,
                });
            }
            self.wraps += 1;
            self.position = 0;
        }
        let codon_index = self.position;
        let codon_value = self.codons[codon_index];
        self.position += 1;
        self.consumed += 1;
        let chosen = codon_value as usize % n_choices;
        if let Some(trace) = &mut self.trace {
            trace.push(Expansion {
                step: trace.len() + 1,
                codon_index,
                codon_value,
                non_terminal,
                n_choices,
                chosen,
            });
        }
        Ok(chosen)
    }
}

/// Map `chrom` through `grammar`.
pub fn map_genotype<'g>(grammar: &'g Grammar, chrom: &Chromosome, max_wraps: usize) -> MappingOutcome<'g> {
    run_mapping(grammar, chrom, max_wraps, false)
}

/// As [`map_genotype`], additionally recording one [`Expansion`] per codon read.
pub fn map_genotype_traced<'g>(grammar: &'g Grammar, chrom: &Chromosome, max_wraps: usize) -> MappingOutcome<'g> {
    run_mapping(grammar, chrom, max_wraps, true)
}

fn run_mapping<'g>(grammar: &'g Grammar, chrom: &Chromosome, max_wraps: usize, traced: bool) -> MappingOutcome<'g> {
    let mut reader = CodonReader {
        codons: chrom.codons(),
        position: 0,
        consumed: 0,
        wraps: 0,
        max_wraps,
        trace: traced.then(Vec::new),
    };
    let result = expand(grammar, grammar.start_id(), false, &mut reader).map(|root| DerivationTree { root });
    MappingOutcome {
        result,
        codons_consumed: reader.consumed,
        wraps_used: reader.wraps,
        trace: reader.trace.unwrap_or_default(),
    }
}

fn expand<'g>(grammar: &'g Grammar, rule_id: usize, spaced: bool, reader: &mut CodonReader<'_, 'g>) -> Result<Node<'g>, MapError> {
    let rule = grammar.rule(rule_id);
    let choice = reader.choose(&rule.name, rule.choices.len())?;
    let children = expand_symbols(grammar, &rule.choices[choice].symbols, reader)?;
    Ok(Node::Branch {
        non_terminal: &rule.name,
        choice,
        spaced,
        children,
    })
}

fn expand_symbols<'g>(grammar: &'g Grammar, symbols: &'g [Symbol], reader: &mut CodonReader<'_, 'g>) -> Result<Vec<Node<'g>>, MapError> {
    symbols
        .iter()
        .map(|sym| match &sym.kind {
            SymbolKind::Terminal(text) => Ok(Node::Leaf {
                text,
                spaced: sym.spaced,
            }),
            SymbolKind::NonTerminal(id) => expand(grammar, *id, sym.spaced, reader),
            SymbolKind::Variable { name, index } => Ok(Node::Variable {
                name: *name,
                spaced: sym.spaced,
                index: index
                    .as_deref()
                    .map(|idx| expand_symbols(grammar, idx, reader))
                    .transpose()?,
            }),
        })
        .collect()
}
