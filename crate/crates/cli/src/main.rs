use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wordidx::beta::BetaStructure;
use wordidx::gamma::GammaNode;
use wordidx::harness::{self, Distribution, HarnessError, Structure, VerifyConfig};
use wordidx::index::{Format, SuccessorIndex};
use wordidx::selector::IndexSequence;
use wordidx::{Width, Word};

#[derive(Parser)]
#[command(
    name = "wordidx",
    version,
    about = "Succinct successor search on a simulated word RAM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Uniform,
    Clustered,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gamma,
    Beta,
    Index,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Hex,
    Bin,
}

#[derive(Subcommand)]
enum Command {
    /// Write sorted distinct random keys, one hex word per line.
    Gen {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform")]
        distribution: Dist,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a structure over a key file and write it out.
    Build {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long, value_enum, default_value = "index")]
        structure: Kind,
        #[arg(long, value_enum, default_value = "hex")]
        format: Fmt,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Successor, rank or prefix queries against a key file or a built index.
    Query {
        /// Key file or index file written by `build`.
        #[arg(long)]
        keys: PathBuf,
        /// File of query words, one hex word per line.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Weak prefix search: report the ranks of keys starting with these bits.
        #[arg(long)]
        prefix: Option<String>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Query words in hex.
        words: Vec<String>,
    },
    /// Check a structure against brute-force oracles.
    Verify {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long, value_enum, default_value = "index")]
        structure: Kind,
        #[arg(long, default_value_t = 10_000)]
        queries: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        width: Option<usize>,
        /// Corrupt one selector plan word before querying.
        #[arg(long)]
        fault: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operation and probe statistics; the text report goes to stdout.
    Bench {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        queries: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        width: Option<usize>,
        /// Write the TOML report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the per-phase snapshots of one selector run.
    Trace {
        #[arg(long, default_value_t = 16)]
        width: usize,
        /// Comma-separated bit positions.
        #[arg(long, default_value = "0,15,12,15")]
        indices: String,
        /// Query word in binary or hex; defaults to the w=16 example word.
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Mismatch(String),
    Usage(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn fail(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| fail(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(bytes).map_err(fail),
    }
}

fn width_arg(bits: usize) -> Result<Width, Failure> {
    Width::from_bits(bits).map_err(fail)
}

fn load_keys(path: &Path, width: Option<usize>) -> Result<Vec<Word>, Failure> {
    let text = String::from_utf8(read(path)?).map_err(|_| fail(format!("{}: not a text key file", path.display())))?;
    let keys = harness::parse_keys(&text).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    if let Some(w) = width {
        let want = width_arg(w)?;
        if keys[0].width() != want {
            return Err(fail(format!(
                "key file holds {}-bit keys, --width says {w}",
                keys[0].bits()
            )));
        }
    }
    Ok(keys)
}

fn structure(kind: Kind) -> Structure {
    match kind {
        Kind::Gamma => Structure::Gamma,
        Kind::Beta => Structure::Beta,
        Kind::Index => Structure::Index,
    }
}

fn parse_query(width: Width, s: &str) -> Result<Word, Failure> {
    Ok(harness::parse_word(width, s)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen {
            count,
            width,
            seed,
            distribution,
            out,
        } => {
            let dist = match distribution {
                Dist::Uniform => Distribution::Uniform,
                Dist::Clustered => Distribution::Clustered,
            };
            let keys = harness::generate_keys(count, width_arg(width)?, seed, dist)?;
            emit(out.as_deref(), harness::format_keys(&keys).as_bytes())
        }
        Command::Build {
            keys,
            structure,
            format,
            width,
            seed,
            out,
        } => {
            let keys = load_keys(&keys, width)?;
            let bytes = match structure {
                Kind::Index => {
                    let idx = SuccessorIndex::build(&keys).map_err(fail)?;
                    idx.to_bytes(match format {
                        Fmt::Hex => Format::Hex,
                        Fmt::Bin => Format::Bin,
                    })
                }
                Kind::Gamma => {
                    let node = GammaNode::build(&keys).map_err(fail)?;
                    match format {
                        Fmt::Hex => node.to_hex_dump().into_bytes(),
                        Fmt::Bin => node.to_words().iter().flat_map(|w| w.to_be_bytes()).collect(),
                    }
                }
                Kind::Beta => {
                    let beta = BetaStructure::build(&keys, seed).map_err(fail)?;
                    format!(
                        "beta width {} keys {} seed {} height {} nodes {} bits {}\n",
                        beta.width(),
                        beta.len(),
                        beta.seed(),
                        beta.height(),
                        beta.node_count(),
                        beta.index_bits()
                    )
                    .into_bytes()
                }
            };
            emit(out.as_deref(), &bytes)
        }
        Command::Query {
            keys,
            queries,
            prefix,
            width,
            out,
            words,
        } => {
            let raw = read(&keys)?;
            let idx = match SuccessorIndex::from_bytes(&raw) {
                Ok(idx) => idx,
                Err(_) => SuccessorIndex::build(&load_keys(&keys, width)?).map_err(fail)?,
            };
            let w = idx.width();
            let mut report = String::new();
            if let Some(bits) = prefix {
                if bits.len() > w.bits() || !bits.chars().all(|c| c == '0' || c == '1') {
                    return Err(fail(format!("prefix must be at most {} binary digits", w.bits())));
                }
                let p = Word::from_bits(
                    w,
                    bits.chars()
                        .map(|c| c == '1')
                        .chain(std::iter::repeat(false))
                        .take(w.bits()),
                );
                match idx.weak_prefix_search(&p, bits.len()).map_err(fail)? {
                    Some(r) => writeln!(report, "prefix {bits} ranks {}..={}", r.start(), r.end()),
                    None => writeln!(report, "prefix {bits} absent"),
                }
                .map_err(fail)?;
            }
            let mut xs = Vec::new();
            if let Some(path) = queries {
                let text = String::from_utf8(read(&path)?).map_err(|_| fail("query file is not text"))?;
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    xs.push(
                        parse_query(w, line)
                            .map_err(|_| fail(format!("{}: line {}: bad word", path.display(), i + 1)))?,
                    );
                }
            }
            for s in &words {
                xs.push(parse_query(w, s)?);
            }
            for x in &xs {
                let rank = idx.rank(x).map_err(fail)?;
                match idx.successor(x).map_err(fail)? {
                    Some((r, k)) => writeln!(report, "{} successor {r} {} rank {rank}", x.to_hex(), k.to_hex()),
                    None => writeln!(report, "{} successor none rank {rank}", x.to_hex()),
                }
                .map_err(fail)?;
            }
            emit(out.as_deref(), report.as_bytes())
        }
        Command::Verify {
            keys,
            structure: kind,
            queries,
            seed,
            width,
            fault,
            jobs,
            out,
        } => {
            let keys = load_keys(&keys, width)?;
            let cfg = VerifyConfig {
                structure: structure(kind),
                queries,
                seed,
                fault,
                jobs,
            };
            let report = harness::verify(&keys, &cfg)?;
            let text = report.render();
            emit(out.as_deref(), text.as_bytes())?;
            if out.is_some() {
                print!("{text}");
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Mismatch(format!("{} mismatches", report.mismatches)))
            }
        }
        Command::Bench {
            keys,
            queries,
            seed,
            width,
            out,
        } => {
            let keys = load_keys(&keys, width)?;
            let report = harness::bench(&keys, queries, seed)?;
            if let Some(p) = &out {
                emit(Some(p), report.to_toml().as_bytes())?;
            }
            emit(None, report.render().as_bytes())
        }
        Command::Trace { width, indices, x, out } => {
            let w = width_arg(width)?;
            let entries = indices
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| fail(format!("bad index {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let seq = IndexSequence::new(entries, w).map_err(fail)?;
            let x = match x {
                None if w == Width::W16 => harness::example_selector().1,
                None => return Err(fail("--x is required unless --width is 16")),
                Some(s) if s.len() == w.bits() && s.chars().all(|c| c == '0' || c == '1') => Word::from_bin_str(w, &s),
                Some(s) => parse_query(w, &s)?,
            };
            emit(out.as_deref(), harness::trace(&seq, &x)?.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch(msg)) => {
            eprintln!("wordidx: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("wordidx: {msg}");
            ExitCode::from(2)
        }
    }
}
