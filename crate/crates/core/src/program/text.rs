//! Line-oriented debug dump of a [`ConvexProgram`].
//!
//! ```text
//! dropf-program 1
//! block <index> <name>
//! active <block-index>
//! var <index> <name> <lower> <upper>
//! obj <constant> <var>:<coef> ...
//! sq <weight> <constant> <var>:<coef> ...
//! eq <block> <constant> <var>:<coef> ...
//! le <block> <constant> <var>:<coef> ...
//! soc <block> <constant> <var>:<coef> ... | <constant> <var>:<coef> ... | ...
//! ```
//!
//! Numbers are printed in Rust's shortest round-trip form, so parsing a dump
//! reproduces the program exactly. The first `soc` segment is the cone
//! bound `t`, the remaining segments are the entries of `u`. Whitespace in
//! names is written as `_`.

use std::fmt::Write as _;

use super::{AffExpr, BlockId, Constraint, ConstraintKind, ConvexProgram, Objective, VarId, Variable, WeightedSquare};
use crate::error::{Error, Result};

pub const HEADER: &str = "dropf-program 1";

fn clean(name: &str) -> String {
    name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}

fn write_expr(out: &mut String, e: &AffExpr) {
    write!(out, "{:?}", e.constant).unwrap();
    for &(v, c) in &e.terms {
        write!(out, " {}:{:?}", v.0, c).unwrap();
    }
}

pub fn to_text(prog: &ConvexProgram) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for (i, b) in prog.blocks.iter().enumerate() {
        writeln!(out, "block {i} {}", clean(b)).unwrap();
    }
    writeln!(out, "active {}", prog.current_block.0).unwrap();
    for (i, v) in prog.vars.iter().enumerate() {
        writeln!(out, "var {i} {} {:?} {:?}", clean(&v.name), v.lower, v.upper).unwrap();
    }
    out.push_str("obj ");
    write_expr(&mut out, &prog.objective.linear);
    out.push('\n');
    for s in &prog.objective.squares {
        write!(out, "sq {:?} ", s.weight).unwrap();
        write_expr(&mut out, &s.expr);
        out.push('\n');
    }
    for c in &prog.constraints {
        match &c.kind {
            ConstraintKind::Eq(e) => {
                write!(out, "eq {} ", c.block.0).unwrap();
                write_expr(&mut out, e);
            }
            ConstraintKind::Le(e) => {
                write!(out, "le {} ", c.block.0).unwrap();
                write_expr(&mut out, e);
            }
            ConstraintKind::Soc { t, u } => {
                write!(out, "soc {} ", c.block.0).unwrap();
                write_expr(&mut out, t);
                for e in u {
                    out.push_str(" | ");
                    write_expr(&mut out, e);
                }
            }
        }
        out.push('\n');
    }
    out
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { file: "<program>".into(), section: "program".into(), line, message: message.into() }
}

fn num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| perr(line, format!("bad number '{tok}'")))
}

fn idx(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| perr(line, format!("bad index '{tok}'")))
}

fn parse_expr<'a>(toks: impl Iterator<Item = &'a str>, line: usize) -> Result<AffExpr> {
    let mut toks = toks.peekable();
    let constant = num(toks.next().ok_or_else(|| perr(line, "missing constant"))?, line)?;
    let mut terms = Vec::new();
    for t in toks {
        let (v, c) = t.split_once(':').ok_or_else(|| perr(line, format!("bad term '{t}'")))?;
        terms.push((VarId(idx(v, line)?), num(c, line)?));
    }
    Ok(AffExpr { terms, constant })
}

pub fn from_text(text: &str) -> Result<ConvexProgram> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(perr(1, format!("expected header '{HEADER}'"))),
    }
    let mut prog = ConvexProgram {
        vars: Vec::new(),
        blocks: Vec::new(),
        constraints: Vec::new(),
        objective: Objective::default(),
        current_block: BlockId(0),
    };
    for (ln, raw) in lines {
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        let (kw, rest) = l.split_once(' ').unwrap_or((l, ""));
        let mut toks = rest.split_whitespace();
        match kw {
            "block" => {
                let i = idx(toks.next().unwrap_or(""), ln)?;
                if i != prog.blocks.len() {
                    return Err(perr(ln, "blocks must be listed in order"));
                }
                prog.blocks.push(toks.next().ok_or_else(|| perr(ln, "missing block name"))?.to_string());
            }
            "active" => prog.current_block = BlockId(idx(toks.next().unwrap_or(""), ln)?),
            "var" => {
                let i = idx(toks.next().unwrap_or(""), ln)?;
                if i != prog.vars.len() {
                    return Err(perr(ln, "variables must be listed in order"));
                }
                let name = toks.next().ok_or_else(|| perr(ln, "missing name"))?.to_string();
                let lower = num(toks.next().unwrap_or(""), ln)?;
                let upper = num(toks.next().unwrap_or(""), ln)?;
                prog.vars.push(Variable { name, lower, upper });
            }
            "obj" => prog.objective.linear = parse_expr(toks, ln)?,
            "sq" => {
                let weight = num(toks.next().unwrap_or(""), ln)?;
                prog.objective.squares.push(WeightedSquare { weight, expr: parse_expr(toks, ln)? });
            }
            "eq" | "le" => {
                let block = BlockId(idx(toks.next().unwrap_or(""), ln)?);
                let e = parse_expr(toks, ln)?;
                let kind = if kw == "eq" { ConstraintKind::Eq(e) } else { ConstraintKind::Le(e) };
                prog.constraints.push(Constraint { block, kind });
            }
            "soc" => {
                let (b, body) = rest.split_once(' ').ok_or_else(|| perr(ln, "missing cone body"))?;
                let block = BlockId(idx(b, ln)?);
                let mut parts = body.split('|').map(|seg| parse_expr(seg.split_whitespace(), ln));
                let t = parts.next().ok_or_else(|| perr(ln, "missing cone bound"))??;
                let u = parts.collect::<Result<Vec<_>>>()?;
                prog.constraints.push(Constraint { block, kind: ConstraintKind::Soc { t, u } });
            }
            other => return Err(perr(ln, format!("unknown record '{other}'"))),
        }
    }
    if prog.blocks.is_empty() {
        prog.blocks.push("main".into());
    }
    if prog.current_block.0 >= prog.blocks.len() || prog.constraints.iter().any(|c| c.block.0 >= prog.blocks.len()) {
        return Err(perr(0, "reference to an undeclared block"));
    }
    prog.validate()?;
    Ok(prog)
}
