//! Instance specifications accepted on the command line.
//!
//! Graph specs are builtin names (`pentagon`, `johnson8-2-4`, `paley:13`, ...)
//! or DIMACS files, optionally prefixed with `dimacs:`. SQP specs are either a
//! graph spec (its Motzkin–Straus matrix) or `random:N:MODE:SEED`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use sddcp::problems::{
    complement, encode_sqp, encode_stable_set, motzkin_straus, random_instance, random_sqp, read_dimacs, read_instance,
    BuiltinGraph, Graph, SqpMode,
};
use sddcp::{CpProblem, SymMatrix};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Instance(PathBuf),
    Sqp(String),
    StableSet(String),
    Clique(String),
}

/// What an exact oracle needs to know about an instance.
#[derive(Clone, Debug, PartialEq)]
pub enum Structure {
    General,
    Sqp(SymMatrix),
    /// The graph whose stability number is the optimal value.
    StableSet(Graph),
}

#[derive(Clone, Debug)]
pub struct Loaded {
    pub id: String,
    pub problem: CpProblem,
    pub structure: Structure,
}

pub fn graph_from_spec(spec: &str) -> CliResult<Graph> {
    let name = spec.strip_prefix("dimacs:").unwrap_or(spec);
    if let Ok(builtin) = BuiltinGraph::from_str(name) {
        return Ok(builtin.build()?);
    }
    let path = Path::new(name);
    if path.exists() {
        return Ok(read_dimacs(path)?);
    }
    Err(CliError::Usage(format!("'{spec}' is neither a builtin graph nor a DIMACS file")))
}

pub fn sqp_matrix(spec: &str) -> CliResult<SymMatrix> {
    if let Some(rest) = spec.strip_prefix("random:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [n, mode, seed] = parts.as_slice() else {
            return Err(CliError::Usage(format!("expected random:N:MODE:SEED, got '{spec}'")));
        };
        let n = parse_num(n, "dimension")?;
        let mode = SqpMode::from_str(mode)?;
        let seed = parse_num(seed, "seed")?;
        return Ok(random_sqp(n, mode, seed)?);
    }
    Ok(motzkin_straus(&graph_from_spec(spec)?))
}

pub fn load(source: &Source) -> CliResult<Loaded> {
    Ok(match source {
        Source::Instance(path) => {
            if !path.exists() {
                return Err(CliError::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
            Loaded { id: path.display().to_string(), problem: read_instance(path)?, structure: Structure::General }
        }
        Source::Sqp(spec) => {
            let q = sqp_matrix(spec)?;
            Loaded { id: format!("sqp:{spec}"), problem: encode_sqp(q.clone()), structure: Structure::Sqp(q) }
        }
        Source::StableSet(spec) => {
            let g = graph_from_spec(spec)?;
            Loaded {
                id: format!("stable-set:{spec}"),
                problem: encode_stable_set(&g)?,
                structure: Structure::StableSet(g),
            }
        }
        Source::Clique(spec) => {
            let g = complement(&graph_from_spec(spec)?);
            Loaded { id: format!("clique:{spec}"), problem: encode_stable_set(&g)?, structure: Structure::StableSet(g) }
        }
    })
}

/// A batch of seeded instances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Random { n: usize, m: usize, count: usize, seed: u64 },
    SqpRandom { n: usize, mode: SqpMode, count: usize, seed: u64 },
}

impl Family {
    pub fn count(&self) -> usize {
        match *self {
            Family::Random { count, .. } | Family::SqpRandom { count, .. } => count,
        }
    }

    /// Instance `i` of the batch, seeded with `seed + i`.
    pub fn instance(&self, i: usize) -> CliResult<Loaded> {
        Ok(match *self {
            Family::Random { n, m, seed, .. } => {
                let s = seed + i as u64;
                Loaded {
                    id: format!("random-{n}-{m}-s{s}"),
                    problem: random_instance(n, m, s)?,
                    structure: Structure::General,
                }
            }
            Family::SqpRandom { n, mode, seed, .. } => {
                let s = seed + i as u64;
                let q = random_sqp(n, mode, s)?;
                Loaded {
                    id: format!("sqp-random-{n}-s{s}"),
                    problem: encode_sqp(q.clone()),
                    structure: Structure::Sqp(q),
                }
            }
        })
    }
}

impl FromStr for Family {
    type Err = CliError;

    /// `random:N:M:COUNT:SEED` or `sqp-random:N:MODE:COUNT:SEED`.
    fn from_str(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let family = match parts.as_slice() {
            ["random", n, m, count, seed] => Family::Random {
                n: parse_num(n, "dimension")?,
                m: parse_num(m, "constraint count")?,
                count: parse_num(count, "count")?,
                seed: parse_num(seed, "seed")?,
            },
            ["sqp-random", n, mode, count, seed] => Family::SqpRandom {
                n: parse_num(n, "dimension")?,
                mode: SqpMode::from_str(mode)?,
                count: parse_num(count, "count")?,
                seed: parse_num(seed, "seed")?,
            },
            _ => {
                return Err(CliError::Usage(format!(
                    "expected random:N:M:COUNT:SEED or sqp-random:N:MODE:COUNT:SEED, got '{s}'"
                )))
            }
        };
        if family.count() == 0 {
            return Err(CliError::Usage("a batch needs at least one instance".into()));
        }
        Ok(family)
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> CliResult<T> {
    s.parse().map_err(|_| CliError::Usage(format!("invalid {what} '{s}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_and_prefixed_specs_agree() {
        let a = graph_from_spec("johnson8-2-4").unwrap();
        let b = graph_from_spec("dimacs:johnson8-2-4").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edge_count(), 210);
    }

    #[test]
    fn unknown_graph_is_usage_error() {
        assert_eq!(graph_from_spec("no-such-graph").unwrap_err().exit_code(), crate::error::EXIT_USAGE);
    }

    #[test]
    fn clique_source_complements() {
        let l = load(&Source::Clique("pentagon".into())).unwrap();
        let Structure::StableSet(g) = l.structure else { panic!("expected a graph") };
        assert_eq!(g.edge_count(), 5);
        assert!(g.has_edge(0, 2));
    }

    #[test]
    fn random_sqp_spec() {
        let q = sqp_matrix("random:5:unit-diagonal:3").unwrap();
        assert_eq!(q.dim(), 5);
        assert!((0..5).all(|i| q.get(i, i) == 1.0));
        assert!(sqp_matrix("random:5:unit").is_err());
    }

    #[test]
    fn family_parsing() {
        assert_eq!("random:10:10:30:7".parse::<Family>().unwrap(), Family::Random { n: 10, m: 10, count: 30, seed: 7 });
        assert_eq!(
            "sqp-random:10:uniform:100:1".parse::<Family>().unwrap(),
            Family::SqpRandom { n: 10, mode: SqpMode::Uniform, count: 100, seed: 1 }
        );
        assert!("random:10:10:0:7".parse::<Family>().is_err());
        assert!("random:10:10".parse::<Family>().is_err());
    }

    #[test]
    fn family_instances_are_seeded() {
        let f: Family = "random:4:2:3:10".parse().unwrap();
        let a = f.instance(1).unwrap();
        let b = f.instance(1).unwrap();
        assert_eq!(a.id, "random-4-2-s11");
        assert_eq!(a.problem, b.problem);
        assert_ne!(a.problem, f.instance(2).unwrap().problem);
    }
}
