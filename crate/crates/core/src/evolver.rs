//! Generational genetic algorithm over codon chromosomes.
//!
//! Every random draw comes from one ChaCha8 stream seeded with
//! [`GaConfig::seed`], in this order:
//!
//! 1. initial population: individual by individual, codon by codon, each
//!    codon uniform in `0..=255`;
//! 2. per generation after evaluation (skipped after the last generation),
//!    until the offspring pool is full: tournament for parent 1, tournament
//!    for parent 2, crossover of the pair, mutation of child 1, mutation of
//!    child 2.
//!
//! Fitness evaluation consumes no randomness and runs in parallel, so the
//! result is a pure function of the configuration and the problem.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expression::{from_derivation, Expr};
use crate::fitness::{self, Fitness, FitnessReport, ObjectiveId};
use crate::grammar::Grammar;
use crate::mapper::{map_genotype, Chromosome};
use crate::simulate::{simulate, EstimatedSeries, PatientSeries};

pub const CODON_SIZE: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvolverError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("chromosome lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// How `mutation_prob` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationMode {
    /// With probability `mutation_prob`, replace one random codon.
    #[default]
    PerIndividual,
    /// Replace each codon independently with probability `mutation_prob`.
    PerCodon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub chromosome_length: usize,
    pub codon_size: u32,
    pub max_wraps: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mutation_mode: MutationMode,
    pub tournament_size: usize,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            generations: 2500,
            chromosome_length: 100,
            codon_size: CODON_SIZE,
            max_wraps: 3,
            crossover_prob: 0.6,
            mutation_prob: 0.2,
            mutation_mode: MutationMode::PerIndividual,
            tournament_size: 2,
            elitism: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolverError> {
        let bad = |m: String| Err(EvolverError::ConfigInvalid(m));
        for (name, v) in [
            ("population_size", self.population_size),
            ("generations", self.generations),
            ("chromosome_length", self.chromosome_length),
            ("tournament_size", self.tournament_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.codon_size != CODON_SIZE {
            return bad(format!("codon_size must be {CODON_SIZE}, got {}", self.codon_size));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.elitism > self.population_size {
            return bad(format!(
                "elitism ({}) exceeds population_size ({})",
                self.elitism, self.population_size
            ));
        }
        Ok(())
    }
}

/// What is being fitted.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub grammar: &'a Grammar,
    pub grammar_id: &'a str,
    pub objective: ObjectiveId,
    pub series: &'a PatientSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: Fitness,
    /// Mean over individuals with a finite fitness.
    pub mean: Option<f64>,
    pub invalid: usize,
    /// Individuals evaluated in this generation.
    pub population: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: GaConfig,
    pub grammar_id: String,
    pub objective: ObjectiveId,
    pub patient_id: String,
    pub best_chromosome: Chromosome,
    pub best_phenotype: Option<String>,
    pub best_expression: Option<String>,
    pub best_fitness: Fitness,
    pub best_pae: Option<f64>,
    pub best_generation: usize,
    pub history: Vec<GenerationStats>,
}

/// Full evaluation of one chromosome, outside the GA.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub phenotype: Option<String>,
    pub expr: Option<Expr>,
    pub estimated: Option<EstimatedSeries>,
    pub report: FitnessReport,
}

/// Map, lower, simulate and score one chromosome.
pub fn assess(problem: &Problem<'_>, chrom: &Chromosome, max_wraps: usize) -> Assessment {
    let failed = |phenotype| Assessment {
        phenotype,
        expr: None,
        estimated: None,
        report: FitnessReport::failed(problem.objective, problem.series.len()),
    };
    let outcome = map_genotype(problem.grammar, chrom, max_wraps);
    let Some(tree) = outcome.tree() else {
        return failed(None);
    };
    let phenotype = Some(tree.phenotype_text());
    let Ok(expr) = from_derivation(tree) else {
        return failed(phenotype);
    };
    let estimated = simulate(&expr, problem.series);
    let report = FitnessReport::compute(problem.objective, problem.series, &estimated)
        .unwrap_or_else(|_| FitnessReport::failed(problem.objective, problem.series.len()));
    Assessment {
        phenotype,
        expr: Some(expr),
        estimated: Some(estimated),
        report,
    }
}

/// Objective value of one chromosome; failures map to [`Fitness::Worst`].
pub fn fitness_of(problem: &Problem<'_>, chrom: &Chromosome, max_wraps: usize) -> Fitness {
    let outcome = map_genotype(problem.grammar, chrom, max_wraps);
    let Some(tree) = outcome.tree() else {
        return Fitness::Worst;
    };
    let Ok(expr) = from_derivation(tree) else {
        return Fitness::Worst;
    };
    let estimated = simulate(&expr, problem.series);
    if !estimated.finite {
        return Fitness::Worst;
    }
    fitness::error_series(problem.series, &estimated)
        .and_then(|e| fitness::evaluate(problem.objective, &e, problem.series.gl()))
        .unwrap_or(Fitness::Worst)
}

/// Index of the tournament winner among `size` distinct random contestants.
///
/// The strictly best fitness wins; ties go to the contestant drawn first.
/// With fewer individuals than `size`, every individual takes part.
pub fn tournament_select<R: Rng + ?Sized>(fitnesses: &[Fitness], size: usize, rng: &mut R) -> usize {
    assert!(!fitnesses.is_empty(), "tournament over an empty population");
    let n = fitnesses.len();
    let size = size.clamp(1, n);
    let mut drawn: Vec<usize> = Vec::with_capacity(size);
    while drawn.len() < size {
        let i = if n == 1 { 0 } else { rng.gen_range(0..n) };
        if !drawn.contains(&i) {
            drawn.push(i);
        }
    }
    let mut winner = drawn[0];
    for &i in &drawn[1..] {
        if fitnesses[i] < fitnesses[winner] {
            winner = i;
        }
    }
    winner
}

/// With probability `prob`, swap the tails after a cut point in `1..len`.
pub fn one_point_crossover<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    prob: f64,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome), EvolverError> {
    if a.len() != b.len() {
        return Err(EvolverError::LengthMismatch(a.len(), b.len()));
    }
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    if rng.gen_bool(prob) && a.len() > 1 {
        let cut = rng.gen_range(1..a.len());
        c1.codons_mut()[cut..].copy_from_slice(&b.codons()[cut..]);
        c2.codons_mut()[cut..].copy_from_slice(&a.codons()[cut..]);
    }
    Ok((c1, c2))
}

fn different_codon<R: Rng + ?Sized>(old: u8, rng: &mut R) -> u8 {
    let v: u8 = rng.gen_range(0..=254);
    if v >= old {
        v + 1
    } else {
        v
    }
}

/// Point mutation. Replacement codons are uniform over the 255 values that
/// differ from the old one.
pub fn point_mutate<R: Rng + ?Sized>(c: &Chromosome, prob: f64, mode: MutationMode, rng: &mut R) -> Chromosome {
    let mut out = c.clone();
    match mode {
        MutationMode::PerIndividual => {
            if rng.gen_bool(prob) {
                let pos = rng.gen_range(0..out.len());
                let codons = out.codons_mut();
                codons[pos] = different_codon(codons[pos], rng);
            }
        }
        MutationMode::PerCodon => {
            for codon in out.codons_mut() {
                if rng.gen_bool(prob) {
                    *codon = different_codon(*codon, rng);
                }
            }
        }
    }
    out
}

fn random_chromosome<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Chromosome {
    Chromosome::new((0..len).map(|_| rng.gen_range(0..=255u8)).collect()).expect("length checked by config")
}

pub fn run(config: &GaConfig, problem: &Problem<'_>) -> Result<RunResult, EvolverError> {
    run_with_progress(config, problem, &mut |_| {})
}

/// Run the GA, calling `progress` once per generation.
pub fn run_with_progress(
    config: &GaConfig,
    problem: &Problem<'_>,
    progress: &mut dyn FnMut(&GenerationStats),
) -> Result<RunResult, EvolverError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut population: Vec<Chromosome> = (0..config.population_size)
        .map(|_| random_chromosome(config.chromosome_length, &mut rng))
        .collect();

    let mut best: Option<(Chromosome, Fitness, usize)> = None;
    let mut history = Vec::with_capacity(config.generations);

    for generation in 0..config.generations {
        let fitnesses: Vec<Fitness> = population
            .par_iter()
            .map(|c| fitness_of(problem, c, config.max_wraps))
            .collect();

        let gen_best = (0..fitnesses.len())
            .min_by(|&a, &b| fitnesses[a].cmp(&fitnesses[b]))
            .expect("population is non-empty");
        if best.as_ref().is_none_or(|(_, f, _)| fitnesses[gen_best] < *f) {
            best = Some((population[gen_best].clone(), fitnesses[gen_best], generation));
        }

        let finite: Vec<f64> = fitnesses.iter().filter_map(|f| f.value()).collect();
        let stats = GenerationStats {
            generation,
            best: fitnesses[gen_best],
            mean: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
            invalid: fitnesses.len() - finite.len(),
            population: fitnesses.len(),
        };
        progress(&stats);
        history.push(stats);

        if generation + 1 == config.generations {
            break;
        }
        population = next_generation(config, &population, &fitnesses, &mut rng)?;
    }

    let (best_chromosome, best_fitness, best_generation) = best.expect("at least one generation");
    let assessment = assess(problem, &best_chromosome, config.max_wraps);
    Ok(RunResult {
        config: config.clone(),
        grammar_id: problem.grammar_id.to_string(),
        objective: problem.objective,
        patient_id: problem.series.patient_id().to_string(),
        best_phenotype: assessment.phenotype,
        best_expression: assessment.expr.as_ref().map(Expr::render),
        best_chromosome,
        best_fitness,
        best_pae: assessment.report.pae_percent,
        best_generation,
        history,
    })
}

fn next_generation(
    config: &GaConfig,
    population: &[Chromosome],
    fitnesses: &[Fitness],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Chromosome>, EvolverError> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by_key(|&i| fitnesses[i]);
    let mut next: Vec<Chromosome> = order[..config.elitism].iter().map(|&i| population[i].clone()).collect();
    while next.len() < config.population_size {
        let p1 = tournament_select(fitnesses, config.tournament_size, rng);
        let p2 = tournament_select(fitnesses, config.tournament_size, rng);
        let (c1, c2) = one_point_crossover(&population[p1], &population[p2], config.crossover_prob, rng)?;
        let c1 = point_mutate(&c1, config.mutation_prob, config.mutation_mode, rng);
        let c2 = point_mutate(&c2, config.mutation_prob, config.mutation_mode, rng);
        next.push(c1);
        if next.len() < config.population_size {
            next.push(c2);
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammars::{self, GrammarId};
    use proptest::prelude::*;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn chrom(v: &[u8]) -> Chromosome {
        Chromosome::new(v.to_vec()).unwrap()
    }

    fn toy_series() -> PatientSeries {
        let gl: Vec<f64> = (0..12).map(|i| 150.0 + 10.0 * (i as f64 * 0.7).sin()).collect();
        let mut ch = vec![0.0; 12];
        ch[4] = 20.0;
        let mut is = vec![0.0; 12];
        is[3] = 2.0;
        PatientSeries::new("toy", gl, ch, is, vec![0.0; 12]).unwrap()
    }

    #[test]
    fn tournament_examples() {
        let f = [Fitness::Value(5.0), Fitness::Value(3.0)];
        for s in 0..20 {
            assert_eq!(tournament_select(&f, 2, &mut rng(s)), 1);
        }
        // Equal fitness: the first drawn contestant wins.
        let eq = [Fitness::Value(1.0); 2];
        for s in 0..20 {
            let mut r1 = rng(s);
            let first = r1.gen_range(0..2);
            assert_eq!(tournament_select(&eq, 2, &mut rng(s)), first);
        }
        assert_eq!(tournament_select(&[Fitness::Worst], 2, &mut rng(1)), 0);
        assert_eq!(tournament_select(&[Fitness::Worst, Fitness::Value(1e9)], 2, &mut rng(1)), 1);
    }

    #[test]
    fn crossover_examples() {
        let a = chrom(&[1, 2]);
        let b = chrom(&[3, 4]);
        let (c1, c2) = one_point_crossover(&a, &b, 1.0, &mut rng(0)).unwrap();
        assert_eq!((c1, c2), (chrom(&[1, 4]), chrom(&[3, 2])));
        let (c1, c2) = one_point_crossover(&a, &b, 0.0, &mut rng(0)).unwrap();
        assert_eq!((c1, c2), (a.clone(), b));
        assert_eq!(
            one_point_crossover(&a, &chrom(&[1]), 1.0, &mut rng(0)),
            Err(EvolverError::LengthMismatch(2, 1))
        );
    }

    #[test]
    fn mutation_examples() {
        let c = chrom(&[7; 50]);
        for s in 0..30 {
            assert_eq!(point_mutate(&c, 0.0, MutationMode::PerIndividual, &mut rng(s)), c);
            let m = point_mutate(&c, 1.0, MutationMode::PerIndividual, &mut rng(s));
            let diff = m.codons().iter().zip(c.codons()).filter(|(a, b)| a != b).count();
            assert_eq!(diff, 1);
            let all = point_mutate(&c, 1.0, MutationMode::PerCodon, &mut rng(s));
            assert!(all.codons().iter().all(|&v| v != 7));
        }
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let cases = [
            GaConfig { population_size: 0, ..Default::default() },
            GaConfig { generations: 0, ..Default::default() },
            GaConfig { chromosome_length: 0, ..Default::default() },
            GaConfig { codon_size: 128, ..Default::default() },
            GaConfig { crossover_prob: 1.5, ..Default::default() },
            GaConfig { mutation_prob: -0.1, ..Default::default() },
            GaConfig { elitism: 101, ..Default::default() },
            GaConfig { tournament_size: 0, ..Default::default() },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(EvolverError::ConfigInvalid(_))), "{c:?}");
        }
    }

    #[test]
    fn single_generation_returns_best_initial() {
        let g = grammars::load(GrammarId::G11);
        let s = toy_series();
        let problem = Problem { grammar: &g, grammar_id: "G11", objective: ObjectiveId::F2, series: &s };
        let config = GaConfig { population_size: 4, generations: 1, seed: 11, ..Default::default() };
        let result = run(&config, &problem).unwrap();

        let mut r = ChaCha8Rng::seed_from_u64(11);
        let initial: Vec<Chromosome> = (0..4).map(|_| random_chromosome(100, &mut r)).collect();
        let best = initial.iter().map(|c| fitness_of(&problem, c, 3)).min().unwrap();
        assert_eq!(result.best_fitness, best);
        assert_eq!(result.history.len(), 1);
        assert!(initial.contains(&result.best_chromosome));
    }

    #[test]
    fn same_seed_same_result() {
        let g = grammars::load(GrammarId::G13);
        let s = toy_series();
        let problem = Problem { grammar: &g, grammar_id: "G13", objective: ObjectiveId::F4, series: &s };
        let config = GaConfig { population_size: 20, generations: 15, seed: 3, ..Default::default() };
        assert_eq!(run(&config, &problem).unwrap(), run(&config, &problem).unwrap());
    }

    #[test]
    fn best_is_reproducible_outside_the_ga() {
        let g = grammars::load(GrammarId::G11);
        let s = toy_series();
        let problem = Problem { grammar: &g, grammar_id: "G11", objective: ObjectiveId::F5, series: &s };
        let config = GaConfig { population_size: 20, generations: 10, seed: 5, ..Default::default() };
        let result = run(&config, &problem).unwrap();
        let again = assess(&problem, &result.best_chromosome, 3);
        assert_eq!(again.report.value, result.best_fitness);
        assert_eq!(again.phenotype, result.best_phenotype);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn crossover_preserves_positional_multisets(
            a in proptest::collection::vec(any::<u8>(), 1..40),
            seed in any::<u64>(),
        ) {
            let b: Vec<u8> = a.iter().map(|v| v.wrapping_mul(31).wrapping_add(7)).collect();
            let (c1, c2) = one_point_crossover(&chrom(&a), &chrom(&b), 0.6, &mut rng(seed)).unwrap();
            prop_assert_eq!(c1.len(), a.len());
            for i in 0..a.len() {
                let mut before = [a[i], b[i]];
                let mut after = [c1.codons()[i], c2.codons()[i]];
                before.sort();
                after.sort();
                prop_assert_eq!(before, after);
            }
        }

        #[test]
        fn tournament_returns_a_drawn_best(
            f in proptest::collection::vec(0.0f64..100.0, 1..30),
            seed in any::<u64>(),
        ) {
            let fit: Vec<Fitness> = f.iter().map(|&v| Fitness::Value(v)).collect();
            let w = tournament_select(&fit, 2, &mut rng(seed));
            prop_assert!(w < fit.len());
        }
    }
}
