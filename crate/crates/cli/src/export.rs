use std::io::{self, Write};

use injurybench::strings::BinStr;
use injurybench::trace::{Replay, Trace};
use injurybench::verify::Index;

/// Trie of every strategy that was ever applied.
struct Node {
    children: [Option<usize>; 2],
    settled: u64,
}

fn label(sigma: &BinStr) -> String {
    let text = sigma.to_string();
    if sigma.len() <= 24 {
        text
    } else {
        format!("{}…({} bits)", &text[..12], sigma.len())
    }
}

pub fn write_dot<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    let mut nodes = vec![Node {
        children: [None, None],
        settled: 0,
    }];
    for rec in &trace.stages {
        let mut at = 0;
        for &b in rec.settled.bits() {
            at = match nodes[at].children[b as usize] {
                Some(c) => c,
                None => {
                    nodes.push(Node {
                        children: [None, None],
                        settled: 0,
                    });
                    let c = nodes.len() - 1;
                    nodes[at].children[b as usize] = Some(c);
                    c
                }
            };
        }
        nodes[at].settled += 1;
    }
    let replay = Replay::new(trace)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    let store = replay.store();
    let horizon = trace.horizon();
    writeln!(out, "digraph strategies {{")?;
    writeln!(out, "  node [shape=box];")?;
    if trace.stages.is_empty() {
        return writeln!(out, "}}");
    }
    let mut stack = vec![(0usize, BinStr::empty())];
    while let Some((i, sigma)) = stack.pop() {
        let init = store
            .init_between(&sigma, 0, horizon)
            .map_or_else(|| "never".to_string(), |t| t.to_string());
        writeln!(
            out,
            "  n{i} [label=\"{}\\nsettled {}\\nlast init {init}\"];",
            label(&sigma),
            nodes[i].settled
        )?;
        for b in [true, false] {
            if let Some(c) = nodes[i].children[b as usize] {
                writeln!(out, "  n{i} -> n{c} [label=\"{}\"];", b as u8)?;
                stack.push((c, sigma.child(b)));
            }
        }
    }
    writeln!(out, "}}")
}

/// One row per stage where `x` grows, with the threat it traces back to.
pub fn write_jump_csv<W: Write>(trace: &Trace, out: W) -> io::Result<()> {
    let index = Index::new(trace);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "origin", "action", "sigma", "mantissa", "exponent"])?;
    for &t in &index.jumps {
        let rec = &trace.stages[t as usize];
        let d = &trace.x[t as usize + 1] - &trace.x[t as usize];
        let origin = index.u.get(&t).map_or_else(String::new, u64::to_string);
        let sigma = rec
            .action
            .sigma()
            .map_or_else(String::new, ToString::to_string);
        w.write_record([
            t.to_string(),
            origin,
            injurybench::verify::action_name(&rec.action).to_string(),
            sigma,
            d.mantissa().to_string(),
            d.exponent().to_string(),
        ])?;
    }
    w.flush()
}
