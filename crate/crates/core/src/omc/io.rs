//! CSV formats for query sequences (`t,i,j,y`) and mistake traces
//! (`t,i,j,y,yhat,margin,mistake,cum_mistakes,ftrl_iters`). Rounds are
//! numbered from 1, indices from 0.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{LabeledSequence, MistakeTrace, Triple};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct SequenceRow {
    t: usize,
    i: usize,
    j: usize,
    y: i8,
}

#[derive(Serialize)]
struct TraceRow {
    t: usize,
    i: usize,
    j: usize,
    y: i8,
    yhat: i8,
    margin: f64,
    mistake: u8,
    cum_mistakes: usize,
    ftrl_iters: usize,
}

pub fn write_sequence(seq: &LabeledSequence, out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if seq.is_empty() {
        w.write_record(["t", "i", "j", "y"])?;
    }
    for (k, tr) in seq.triples().iter().enumerate() {
        w.serialize(SequenceRow { t: k + 1, i: tr.i, j: tr.j, y: tr.y })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sequence over an `rows × cols` matrix; rounds must be numbered `1, 2, …`.
pub fn read_sequence(input: impl Read, rows: usize, cols: usize) -> Result<LabeledSequence> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "i", "j", "y"] {
        return Err(Error::Parse { line: 1, msg: "sequence header must be `t,i,j,y`".into() });
    }
    let mut triples = Vec::new();
    for (k, rec) in r.deserialize::<SequenceRow>().enumerate() {
        let row = rec?;
        if row.t != k + 1 {
            return Err(Error::Parse { line: k + 2, msg: format!("expected round {}, found {}", k + 1, row.t) });
        }
        triples.push(Triple { i: row.i, j: row.j, y: row.y });
    }
    LabeledSequence::new(rows, cols, triples)
}

pub fn write_trace(trace: &MistakeTrace, out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if trace.per_round.is_empty() {
        w.write_record(["t", "i", "j", "y", "yhat", "margin", "mistake", "cum_mistakes", "ftrl_iters"])?;
    }
    let mut cum = 0;
    for r in &trace.per_round {
        cum += usize::from(r.mistake);
        w.serialize(TraceRow {
            t: r.t,
            i: r.i,
            j: r.j,
            y: r.y,
            yhat: r.y_hat,
            margin: r.margin,
            mistake: u8::from(r.mistake),
            cum_mistakes: cum,
            ftrl_iters: r.ftrl_iters,
        })?;
    }
    w.flush()?;
    Ok(())
}
