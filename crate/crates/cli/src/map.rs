//! `map`: decode one chromosome and show how it was read.

use anyhow::{bail, Result};
use glucevo_core::expression::from_derivation;
use glucevo_core::grammar::Grammar;
use glucevo_core::mapper::{map_genotype_traced, Chromosome, MapError};

#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    pub phenotype: Result<String, MapError>,
    /// Canonical form, when the phenotype is an expression.
    pub expression: Option<String>,
    pub wraps_used: usize,
    pub codons_consumed: usize,
    pub trace: Vec<String>,
}

impl MapReport {
    pub fn is_success(&self) -> bool {
        self.phenotype.is_ok()
    }
}

pub fn cmd_map(grammar: &Grammar, codons: &[i64], max_wraps: usize) -> Result<MapReport> {
    if codons.is_empty() {
        bail!("at least one codon is required");
    }
    let chrom = Chromosome::from_values(codons)?;
    let outcome = map_genotype_traced(grammar, &chrom, max_wraps);
    let expression = outcome
        .tree()
        .and_then(|t| from_derivation(t).ok())
        .map(|e| e.render());
    Ok(MapReport {
        phenotype: outcome.result.as_ref().map(|t| t.phenotype_text()).map_err(Clone::clone),
        expression,
        wraps_used: outcome.wraps_used,
        codons_consumed: outcome.codons_consumed,
        trace: outcome.trace.iter().map(ToString::to_string).collect(),
    })
}

/// Codons from free text: separated by commas and/or whitespace.
pub fn parse_codons(text: &str) -> Result<Vec<i64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<i64>().map_err(|_| anyhow::anyhow!("`{s}` is not an integer codon")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use glucevo_core::grammars::{self, GrammarId};

    #[test]
    fn worked_example() {
        let g = grammars::load(GrammarId::Example);
        let r = cmd_map(&g, &[12, 55, 23, 47, 38, 254, 2], 3).unwrap();
        assert_eq!(r.phenotype.as_deref(), Ok("Abs(X) * X"));
        assert_eq!(r.wraps_used, 1);
        assert_eq!(r.expression.as_deref(), Some("(Abs(X) * X)"));
        assert_eq!(r.trace.len(), 8);
    }

    #[test]
    fn bad_input() {
        let g = grammars::load(GrammarId::G11);
        assert!(cmd_map(&g, &[], 3).is_err());
        assert!(cmd_map(&g, &[256], 3).is_err());
        assert!(!cmd_map(&g, &[0; 100], 3).unwrap().is_success());
    }

    #[test]
    fn codon_text() {
        assert_eq!(parse_codons("12,55 23\n47").unwrap(), vec![12, 55, 23, 47]);
        assert!(parse_codons("1,x").is_err());
    }
}
