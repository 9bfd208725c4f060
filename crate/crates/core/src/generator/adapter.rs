//! Line-oriented bridge to external generators.
//!
//! Requests are `id<TAB>direction<TAB>k<TAB>input_smiles`; responses are
//! `id<TAB>rank<TAB>score<TAB>output_smiles`. A subprocess endpoint receives
//! each batch followed by an empty line on stdin and answers on stdout,
//! ending with an empty line. A file endpoint writes the request file, runs
//! an optional command and reads the response file.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{Direction, GenerationCandidate, Generator, GeneratorError};
use crate::chem::{canonicalize, parse_smiles};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Subprocess {
        program: String,
        args: Vec<String>,
    },
    /// `command` runs after the request file is written and must leave the
    /// response file behind. `{request}` and `{response}` in its arguments
    /// are replaced by the paths.
    Files {
        request: PathBuf,
        response: PathBuf,
        command: Option<Vec<String>>,
    },
}

impl Endpoint {
    /// `cmd:<program> [args...]` or `files:<request>,<response>[,<command...>]`.
    pub fn parse(endpoint: &str) -> Result<Endpoint, String> {
        if let Some(rest) = endpoint.strip_prefix("cmd:") {
            let mut words = rest.split_whitespace().map(String::from);
            let program = words.next().ok_or("empty adapter command")?;
            return Ok(Endpoint::Subprocess { program, args: words.collect() });
        }
        if let Some(rest) = endpoint.strip_prefix("files:") {
            let mut parts = rest.splitn(3, ',');
            let request = parts.next().filter(|s| !s.is_empty()).ok_or("missing request path")?;
            let response = parts.next().filter(|s| !s.is_empty()).ok_or("missing response path")?;
            let command = parts
                .next()
                .map(|c| c.split_whitespace().map(String::from).collect::<Vec<_>>())
                .filter(|c| !c.is_empty());
            return Ok(Endpoint::Files { request: request.into(), response: response.into(), command });
        }
        Err(format!("adapter endpoint '{endpoint}' must start with 'cmd:' or 'files:'"))
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct AdapterGenerator {
    endpoint: Endpoint,
    session: Mutex<Option<Session>>,
    dropped: AtomicUsize,
}

impl AdapterGenerator {
    pub fn new(endpoint: Endpoint) -> Self {
        AdapterGenerator { endpoint, session: Mutex::new(None), dropped: AtomicUsize::new(0) }
    }

    fn exchange_subprocess(
        &self,
        program: &str,
        args: &[String],
        request: &str,
    ) -> Result<Vec<String>, GeneratorError> {
        let transport = |e: std::io::Error| GeneratorError::Transport(format!("{program}: {e}"));
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            let mut child = Command::new(program)
                .args(args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(transport)?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
            *guard = Some(Session { child, stdin, stdout });
        }
        let session = guard.as_mut().unwrap();
        let result = (|| {
            session.stdin.write_all(request.as_bytes())?;
            session.stdin.write_all(b"\n")?;
            session.stdin.flush()?;
            let mut lines = Vec::new();
            loop {
                let mut line = String::new();
                if session.stdout.read_line(&mut line)? == 0 {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::UnexpectedEof,
                        "endpoint closed its output before the end of the batch",
                    ));
                }
                let line = line.trim_end_matches(['\n', '\r']);
                if line.is_empty() {
                    return Ok(lines);
                }
                lines.push(line.to_string());
            }
        })();
        if result.is_err() {
            *guard = None;
        }
        result.map_err(transport)
    }

    fn exchange_files(
        &self,
        request_path: &PathBuf,
        response_path: &PathBuf,
        command: Option<&Vec<String>>,
        request: &str,
    ) -> Result<Vec<String>, GeneratorError> {
        let _guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        let transport = |what: &str, e: &dyn std::fmt::Display| GeneratorError::Transport(format!("{what}: {e}"));
        fs::write(request_path, request).map_err(|e| transport("writing request file", &e))?;
        if let Some(cmd) = command {
            let args: Vec<String> = cmd[1..]
                .iter()
                .map(|a| {
                    a.replace("{request}", &request_path.to_string_lossy())
                        .replace("{response}", &response_path.to_string_lossy())
                })
                .collect();
            let status = Command::new(&cmd[0]).args(&args).status().map_err(|e| transport(&cmd[0], &e))?;
            if !status.success() {
                return Err(GeneratorError::Transport(format!("{} exited with {status}", cmd[0])));
            }
        }
        let text = fs::read_to_string(response_path).map_err(|e| transport("reading response file", &e))?;
        Ok(text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect())
    }
}

/// Validates response lines against the batch and canonicalizes outputs.
/// Unparseable outputs are skipped and counted; remaining candidates are
/// renumbered without gaps.
pub(crate) fn parse_responses(
    lines: &[String],
    batch: usize,
    k: usize,
    dropped: &mut usize,
) -> Result<Vec<Vec<GenerationCandidate>>, GeneratorError> {
    let mut out: Vec<Vec<GenerationCandidate>> = vec![Vec::new(); batch];
    let mut next_rank = vec![1usize; batch];
    let mut last_score = vec![f64::INFINITY; batch];
    let mut seen: Vec<HashSet<String>> = vec![HashSet::new(); batch];
    for (n, line) in lines.iter().enumerate() {
        let protocol = |why: String| GeneratorError::Protocol(format!("response line {}: {why}: '{line}'", n + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(protocol(format!("expected 4 fields, found {}", fields.len())));
        }
        let id: usize = fields[0]
            .parse()
            .ok()
            .filter(|&id| id < batch)
            .ok_or_else(|| protocol(format!("unknown id '{}'", fields[0])))?;
        let rank: usize = fields[1].parse().map_err(|_| protocol("rank is not an integer".into()))?;
        if rank != next_rank[id] {
            return Err(protocol(format!("expected rank {} for id {id}, got {rank}", next_rank[id])));
        }
        if rank > k {
            return Err(protocol(format!("rank {rank} exceeds k={k}")));
        }
        next_rank[id] += 1;
        let score: f64 = fields[2]
            .parse()
            .ok()
            .filter(|s: &f64| !s.is_nan())
            .ok_or_else(|| protocol("score is not a number".into()))?;
        if score > last_score[id] {
            return Err(protocol(format!("score increases with rank for id {id}")));
        }
        last_score[id] = score;
        let mol = match parse_smiles(fields[3]) {
            Ok(m) if !m.is_empty() => m,
            _ => {
                log::warn!("dropping unparseable adapter output for id {id}: '{}'", fields[3]);
                *dropped += 1;
                continue;
            }
        };
        let output = canonicalize(&mol);
        if seen[id].insert(output.clone()) {
            let rank = out[id].len() + 1;
            out[id].push(GenerationCandidate { output, score, rank });
        }
    }
    Ok(out)
}

/// Inputs per request; small enough that a request never fills a pipe
/// buffer while the endpoint is still writing.
const CHUNK: usize = 64;

impl AdapterGenerator {
    fn exchange(
        &self,
        inputs: &[String],
        direction: Direction,
        k: usize,
    ) -> Result<Vec<Vec<GenerationCandidate>>, GeneratorError> {
        let mut request = String::new();
        for (id, input) in inputs.iter().enumerate() {
            let mol = parse_smiles(input).map_err(|e| GeneratorError::BadInput(input.clone(), e.to_string()))?;
            request.push_str(&format!("{id}\t{direction}\t{k}\t{}\n", canonicalize(&mol)));
        }
        let lines = match &self.endpoint {
            Endpoint::Subprocess { program, args } => self.exchange_subprocess(program, args, &request)?,
            Endpoint::Files { request: rq, response: rs, command } => {
                self.exchange_files(rq, rs, command.as_ref(), &request)?
            }
        };
        let mut dropped = 0;
        let result = parse_responses(&lines, inputs.len(), k, &mut dropped);
        self.dropped.fetch_add(dropped, Ordering::Relaxed);
        result
    }
}

impl Generator for AdapterGenerator {
    fn name(&self) -> &str {
        "adapter"
    }

    fn generate_batch(
        &self,
        inputs: &[String],
        direction: Direction,
        k: usize,
    ) -> Result<Vec<Vec<GenerationCandidate>>, GeneratorError> {
        if k == 0 {
            return Err(GeneratorError::ZeroK);
        }
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(CHUNK) {
            out.extend(self.exchange(chunk, direction, k)?);
        }
        Ok(out)
    }

    fn dropped_lines(&self) -> usize {
        self.dropped.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(text: &str) -> Vec<String> {
        text.lines().map(String::from).collect()
    }

    #[test]
    fn parses_out_of_order_ids() {
        let mut dropped = 0;
        let out = parse_responses(&lines("1\t1\t0.9\tCCO\n0\t1\t0.5\tOCC\n1\t2\t0.1\tC"), 2, 5, &mut dropped).unwrap();
        assert_eq!(out[0].len(), 1);
        assert_eq!(out[1].iter().map(|c| c.rank).collect::<Vec<_>>(), [1, 2]);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn drops_unparseable() {
        let mut dropped = 0;
        let out = parse_responses(&lines("0\t1\t3\tCCO\n0\t2\t2\tC1CC\n0\t3\t1\tCCN"), 1, 3, &mut dropped).unwrap();
        assert_eq!(out[0].len(), 2);
        assert_eq!(out[0][1].rank, 2);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn protocol_errors() {
        let mut d = 0;
        let err = |t: &str| parse_responses(&lines(t), 1, 5, &mut 0).unwrap_err().to_string();
        assert!(err("0\t1\t1\tC\n0\t3\t0\tO").contains("expected rank 2"));
        assert!(err("7\t1\t1\tC").contains("unknown id"));
        assert!(err("0\t1\t1\tC\n0\t2\t5\tO").contains("score increases"));
        assert!(err("0\t1\tC").contains("expected 4 fields"));
        assert!(parse_responses(&lines("0\t1\t1\tC\n0\t2\t0\tO"), 1, 1, &mut d).is_err());
    }

    #[test]
    fn endpoint_specs() {
        assert_eq!(
            Endpoint::parse("cmd:model --beam 5").unwrap(),
            Endpoint::Subprocess { program: "model".into(), args: vec!["--beam".into(), "5".into()] }
        );
        assert!(matches!(Endpoint::parse("files:a.txt,b.txt").unwrap(), Endpoint::Files { command: None, .. }));
        assert!(Endpoint::parse("http://x").is_err());
    }

    #[test]
    fn file_endpoint_with_shell_command() {
        let dir = tempfile::tempdir().unwrap();
        let rq = dir.path().join("req.tsv");
        let rs = dir.path().join("resp.tsv");
        let script = "awk -F'\\t' '{print $1 \"\\t1\\t0\\t\" $4}' \"$0\" > \"$1\"";
        let gen = AdapterGenerator::new(Endpoint::Files {
            request: rq,
            response: rs,
            command: Some(vec!["sh".into(), "-c".into(), script.into(), "{request}".into(), "{response}".into()]),
        });
        let out = gen.generate_batch(&["OCC".into(), "c1ccccc1".into()], Direction::Retro, 3).unwrap();
        assert_eq!(out[0][0].output, canonicalize(&parse_smiles("CCO").unwrap()));
        assert_eq!(out[1][0].output, "c1ccccc1");
    }
}
