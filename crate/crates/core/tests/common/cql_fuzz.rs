use pathwise_core::cql::{parse_library, parse_library_bytes, print_library, CqlError};
use pathwise_core::diagram::parse_diagram;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{compile, dictionary, read_fixture};

pub fn seeds() -> Vec<Vec<u8>> {
    let dict = dictionary();
    let mut out = Vec::new();
    for f in ["chain3.json", "eval/colorectal.json", "eval/general.json", "eval/lung.json"] {
        let c = compile(&parse_diagram(&read_fixture(f)).unwrap(), &dict);
        out.push(c.defs_source.into_bytes());
        out.push(c.routing_source.into_bytes());
    }
    out
}

pub const TOKENS: &[&str] = &[
    "define",
    "library",
    "include",
    "called",
    "code",
    "codesystem",
    "from",
    "display",
    "version",
    "using",
    "FHIR",
    "if",
    "then",
    "else",
    "and",
    "or",
    "not",
    "exists",
    "where",
    "AgeInYears()",
    "(",
    ")",
    "[",
    "]",
    ":",
    ".",
    "\"",
    "'",
    "//",
    "/*",
    "*/",
    ">=",
    "<",
    "=",
    "!=",
    "\n",
    " ",
    "0",
    "1.5",
    "-",
    "true",
    "false",
    "null",
    "\u{e9}",
    "\u{0}",
];

/// Mutates a valid library: byte flips, truncation, splices and token
/// insertions.
pub fn mutate(rng: &mut StdRng, seed: &[u8]) -> Vec<u8> {
    let mut b = seed.to_vec();
    for _ in 0..rng.gen_range(1..8) {
        if b.is_empty() {
            break;
        }
        let at = rng.gen_range(0..b.len());
        match rng.gen_range(0..5) {
            0 => b[at] = rng.gen(),
            1 => b.truncate(at),
            2 => {
                let end = (at + rng.gen_range(1..40)).min(b.len());
                b.drain(at..end);
            }
            3 => {
                let t = TOKENS[rng.gen_range(0..TOKENS.len())].as_bytes();
                b.splice(at..at, t.iter().copied());
            }
            _ => {
                let other = rng.gen_range(0..b.len());
                let chunk: Vec<u8> = b[other..(other + 30).min(b.len())].to_vec();
                b.splice(at..at, chunk);
            }
        }
    }
    b
}

pub fn structured(err: &CqlError) -> bool {
    let loc = err.location();
    matches!(err.code(), "E_LEX" | "E_PARSE") && loc.line >= 1 && loc.col >= 1 && !err.to_string().is_empty()
}

/// Parses 10,000 random, token-soup and mutated libraries. Accepted input
/// must round trip; rejected input must carry a located error. Returns the
/// number rejected.
pub fn fuzz_parser(iterations: usize) -> usize {
    let seeds = seeds();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut rejected = 0;
    for i in 0..iterations {
        let input: Vec<u8> = match i % 4 {
            0 => (0..rng.gen_range(0..300)).map(|_| rng.gen()).collect(),
            1 => (0..rng.gen_range(0..80)).flat_map(|_| TOKENS[rng.gen_range(0..TOKENS.len())].bytes()).collect(),
            _ => mutate(&mut rng, &seeds[i % seeds.len()]),
        };
        match parse_library_bytes(&input) {
            Ok(lib) => {
                // anything accepted must survive a print/parse round trip
                let printed = print_library(&lib);
                assert_eq!(parse_library(&printed).unwrap(), lib, "round trip failed for input {i}");
            }
            Err(e) => {
                assert!(structured(&e), "{e:?}");
                rejected += 1;
            }
        }
    }
    rejected
}
