//! Test endpoint for the generator wire format.
//!
//! `adapter-stub <mode>` serves batches on stdin/stdout until EOF;
//! `adapter-stub <mode> <request> <response>` answers one request file.
//!
//! Modes:
//! - `echo`: one candidate per query, the query itself
//! - `gap`: ranks 1 and 3
//! - `badid`: answers for an id outside the batch
//! - `badsmiles`: three candidates, the second unparseable
//! - `nonmonotone`: scores grow with rank
//! - `silent`: no candidates at all

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

fn respond(mode: &str, request: &[String]) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let batch = request.len();
    for line in request {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(format!("malformed request line '{line}'"));
        }
        let (id, k, input) = (f[0], f[2].parse::<usize>().map_err(|e| e.to_string())?, f[3]);
        match mode {
            "echo" => out.push(format!("{id}\t1\t0\t{input}")),
            "gap" => {
                out.push(format!("{id}\t1\t1\t{input}"));
                out.push(format!("{id}\t3\t0\t{input}"));
            }
            "badid" => out.push(format!("{}\t1\t0\t{input}", batch + 5)),
            "badsmiles" => {
                let cands = [input, "C1CC(", "C"];
                for (r, c) in cands.iter().enumerate().take(k) {
                    out.push(format!("{id}\t{}\t{}\t{c}", r + 1, 3 - r));
                }
            }
            "nonmonotone" => {
                out.push(format!("{id}\t1\t0\t{input}"));
                if k > 1 {
                    out.push(format!("{id}\t2\t5\tC"));
                }
            }
            "silent" => {}
            other => return Err(format!("unknown mode '{other}'")),
        }
    }
    Ok(out)
}

fn serve(mode: &str) -> Result<(), String> {
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    let mut batch = Vec::new();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| e.to_string())?;
        if !line.is_empty() {
            batch.push(line);
            continue;
        }
        for r in respond(mode, &batch)? {
            writeln!(stdout, "{r}").map_err(|e| e.to_string())?;
        }
        writeln!(stdout).and_then(|_| stdout.flush()).map_err(|e| e.to_string())?;
        batch.clear();
    }
    Ok(())
}

fn answer_file(mode: &str, request: &str, response: &str) -> Result<(), String> {
    let text = std::fs::read_to_string(request).map_err(|e| format!("{request}: {e}"))?;
    let lines: Vec<String> = text.lines().filter(|l| !l.is_empty()).map(String::from).collect();
    let mut out = respond(mode, &lines)?.join("\n");
    out.push('\n');
    std::fs::write(response, out).map_err(|e| format!("{response}: {e}"))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = match args.as_slice() {
        [mode] => serve(mode),
        [mode, request, response] => answer_file(mode, request, response),
        _ => Err("usage: adapter-stub <mode> [<request> <response>]".into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adapter-stub: {e}");
            ExitCode::from(1)
        }
    }
}
