//! Plain-text export of a model.
//!
//! ```text
//! rcmdp-env v1
//! states <S>
//! actions <A>
//! signals <K+1>
//! discount <gamma>
//! kl_radius <C_KL>
//! senses <min|max> ...              (K+1 entries)
//! transforms <offset> <scale> ...   (K+1 pairs, native -> canonical)
//! thresholds <b_1> ... <b_K>        (canonical)
//! initial <rho_0> ... <rho_{S-1}>
//! kernel                            (then S*A rows of S values, row s*A + a)
//! cost <i>                          (then S rows of A values), for i = 0..K
//! end
//! ```
//!
//! Values are whitespace-separated and written in Rust's shortest
//! round-trip form, so reading back reproduces every float exactly.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{ChannelTransform, Sense, TabularCMDP};

const MAGIC: &str = "rcmdp-env v1";

fn join<I: IntoIterator<Item = f64>>(values: I) -> String {
    values.into_iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub fn write_env<W: Write>(m: &TabularCMDP, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "states {}", m.n_states)?;
    writeln!(w, "actions {}", m.n_actions)?;
    writeln!(w, "signals {}", m.costs.len())?;
    writeln!(w, "discount {:?}", m.discount)?;
    writeln!(w, "kl_radius {:?}", m.kl_radius)?;
    let senses: Vec<&str> = m.senses.iter().map(|s| s.as_str()).collect();
    writeln!(w, "senses {}", senses.join(" "))?;
    writeln!(w, "transforms {}", join(m.transforms.iter().flat_map(|t| [t.offset, t.scale])))?;
    writeln!(w, "thresholds {}", join(m.thresholds.iter().copied()))?;
    writeln!(w, "initial {}", join(m.initial_dist.iter().copied()))?;
    writeln!(w, "kernel")?;
    for r in 0..m.kernel.nrows() {
        writeln!(w, "{}", join(m.kernel.row(r).iter().copied()))?;
    }
    for (i, c) in m.costs.iter().enumerate() {
        writeln!(w, "cost {i}")?;
        for s in 0..c.nrows() {
            writeln!(w, "{}", join(c.row(s).iter().copied()))?;
        }
    }
    writeln!(w, "end")?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.number += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Parse(format!("line {}: {msg}", self.number))
    }

    /// Next line split as `key rest...`; fails unless the key matches.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok(parts.map(str::to_owned).collect()),
            _ => Err(self.err(format!("expected `{key}`, found {line:?}"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        match v.as_slice() {
            [x] => x.parse().map_err(|_| self.err(format!("bad {key} {x:?}"))),
            _ => Err(self.err(format!("`{key}` takes one value"))),
        }
    }

    fn floats_of(&self, tokens: &[String], expected: usize) -> Result<Vec<f64>> {
        if tokens.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", tokens.len())));
        }
        tokens
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("bad number {t:?}"))))
            .collect()
    }

    fn keyed_floats(&mut self, key: &str, expected: usize) -> Result<Vec<f64>> {
        let tokens = self.keyed(key)?;
        self.floats_of(&tokens, expected)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next()?;
            let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
            data.extend(self.floats_of(&tokens, cols)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
}

/// Parse and validate a model written by [`write_env`].
pub fn read_env<R: BufRead>(r: R) -> Result<TabularCMDP> {
    let mut lines = Lines { inner: r.lines(), number: 0 };
    let first = lines.next()?;
    if first.trim() != MAGIC {
        return Err(lines.err(format!("expected header {MAGIC:?}")));
    }
    let ns = lines.count("states")?;
    let na = lines.count("actions")?;
    let k1 = lines.count("signals")?;
    if ns == 0 || na == 0 || k1 == 0 {
        return Err(lines.err("states, actions and signals must be positive"));
    }
    let discount = lines.keyed_floats("discount", 1)?[0];
    let kl_radius = lines.keyed_floats("kl_radius", 1)?[0];
    let senses = lines
        .keyed("senses")?
        .iter()
        .map(|s| match s.as_str() {
            "min" => Ok(Sense::Minimize),
            "max" => Ok(Sense::Maximize),
            other => Err(lines.err(format!("bad sense {other:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if senses.len() != k1 {
        return Err(lines.err(format!("expected {k1} senses, found {}", senses.len())));
    }
    let t = lines.keyed_floats("transforms", 2 * k1)?;
    let transforms = t.chunks(2).map(|c| ChannelTransform { offset: c[0], scale: c[1] }).collect();
    let thresholds = lines.keyed_floats("thresholds", k1 - 1)?;
    let initial = DVector::from_vec(lines.keyed_floats("initial", ns)?);
    lines.keyed("kernel")?;
    let kernel = lines.matrix(ns * na, ns)?;
    let mut costs = Vec::with_capacity(k1);
    for i in 0..k1 {
        let idx = lines.keyed("cost")?;
        if idx != [i.to_string()] {
            return Err(lines.err(format!("expected `cost {i}`")));
        }
        costs.push(lines.matrix(ns, na)?);
    }
    lines.keyed("end")?;
    let model = TabularCMDP {
        n_states: ns,
        n_actions: na,
        kernel,
        costs,
        thresholds,
        senses,
        transforms,
        discount,
        initial_dist: initial,
        kl_radius,
    };
    model.validate()?;
    Ok(model)
}
