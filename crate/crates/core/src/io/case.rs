//! Structured-text case files.
//!
//! ```text
//! dropf-case 1
//! kind distribution            # or transmission
//! name feeder37
//! base_kva 1000                # transmission: base_mva 100
//! v_slack 1.0
//! v_limits 0.95 1.05
//! prices 10 3 3 6              # optional
//! monitored n28 n33            # optional, default all non-slack buses
//!
//! [buses]
//! n1 slack
//! n2
//!
//! [lines]
//! n1 n2 0.0012 0.0009          # distribution: from to r x (p.u.)
//! l7 b8 b9 0.03 600 risk       # transmission: name from to x (p.u.) limit (MW) [risk]
//!
//! [devices]
//! load L2 n2 85 40 error=load  # p (kW), q (kvar), optional relative error component
//! pv PV4 n4 150 0.9 error=pv4  # rating (kVA), power factor, error component
//! storage B9 n9 100 0.1 50     # capacity (kWh), power/capacity ratio, initial charge (kWh)
//! gen G1 b1 0 1000 0.00001 0.02 0   # p_min, p_max (MW), c1 per MW²h, c2 per MWh, c3 per h
//! wind W1 b9 500 200           # nominal feed-in (MW), error std (MW)
//! load D3 b3 940               # transmission load (MW)
//! ```
//!
//! Everything after `#` is a comment. Units are converted to per unit here
//! and nowhere else.

use std::collections::HashMap;
use std::path::Path;

use crate::case::{DistributionCase, GridCase, TransmissionCase};
use crate::devices::{CostPrices, Generator, Load, ResInverter, StorageUnit, TransLoad, WindFarm};
use crate::error::{Error, Result};
use crate::grid::{DistributionFeeder, FeederLine, TransLine, TransmissionGrid};

pub const CASE_HEADER: &str = "dropf-case 1";

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Distribution,
    Transmission,
}

struct Parser<'a> {
    file: &'a str,
}

impl Parser<'_> {
    fn err(&self, section: &str, line: usize, message: impl Into<String>) -> Error {
        Error::Parse { file: self.file.to_string(), section: section.to_string(), line, message: message.into() }
    }

    fn num(&self, section: &str, line: usize, tok: &str, what: &str) -> Result<f64> {
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(section, line, format!("{what}: '{tok}' is not a finite number")))
    }

    fn arity(&self, section: &str, line: usize, toks: &[&str], min: usize, max: usize, usage: &str) -> Result<()> {
        if toks.len() < min || toks.len() > max {
            return Err(self.err(section, line, format!("expected '{usage}'")));
        }
        Ok(())
    }
}

/// Positional tokens and `key=value` options of one line.
fn split_options<'a>(toks: &[&'a str]) -> (Vec<&'a str>, HashMap<&'a str, &'a str>) {
    let mut pos = Vec::new();
    let mut opts = HashMap::new();
    for t in toks {
        match t.split_once('=') {
            Some((k, v)) => {
                opts.insert(k, v);
            }
            None => pos.push(*t),
        }
    }
    (pos, opts)
}

#[derive(Default)]
struct Sections<'a> {
    header: Vec<(usize, Vec<&'a str>)>,
    buses: Vec<(usize, Vec<&'a str>)>,
    lines: Vec<(usize, Vec<&'a str>)>,
    devices: Vec<(usize, Vec<&'a str>)>,
}

fn split_sections<'a>(p: &Parser, text: &'a str) -> Result<Sections<'a>> {
    let mut s = Sections::default();
    let mut current = "header";
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !seen_header {
            if line != CASE_HEADER {
                return Err(p.err("header", n, format!("expected '{CASE_HEADER}', found '{line}'")));
            }
            seen_header = true;
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = match name.trim() {
                "buses" => "buses",
                "lines" => "lines",
                "devices" => "devices",
                other => return Err(p.err(other, n, format!("unknown section [{other}]"))),
            };
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match current {
            "header" => s.header.push((n, toks)),
            "buses" => s.buses.push((n, toks)),
            "lines" => s.lines.push((n, toks)),
            _ => s.devices.push((n, toks)),
        }
    }
    if !seen_header {
        return Err(p.err("header", 0, "empty case file"));
    }
    Ok(s)
}

struct Header {
    kind: Kind,
    name: String,
    values: HashMap<String, (usize, Vec<String>)>,
}

fn parse_header(p: &Parser, lines: &[(usize, Vec<&str>)]) -> Result<Header> {
    let mut values: HashMap<String, (usize, Vec<String>)> = HashMap::new();
    for (n, toks) in lines {
        if toks.len() < 2 {
            return Err(p.err("header", *n, format!("key '{}' needs a value", toks[0])));
        }
        values.insert(toks[0].to_string(), (*n, toks[1..].iter().map(|t| t.to_string()).collect::<Vec<_>>()));
    }
    let kind = match values.get("kind").map(|(n, v)| (*n, v[0].as_str())) {
        Some((_, "distribution")) => Kind::Distribution,
        Some((_, "transmission")) => Kind::Transmission,
        Some((n, other)) => return Err(p.err("header", n, format!("unknown kind '{other}'"))),
        None => return Err(p.err("header", 0, "missing 'kind'")),
    };
    let name = values.get("name").map(|(_, v)| v[0].clone()).ok_or_else(|| p.err("header", 0, "missing 'name'"))?;
    Ok(Header { kind, name, values })
}

impl Header {
    fn nums(&self, p: &Parser, key: &str, count: usize) -> Result<Option<Vec<f64>>> {
        let Some((n, v)) = self.values.get(key) else { return Ok(None) };
        if v.len() != count {
            return Err(p.err("header", *n, format!("'{key}' takes {count} value(s)")));
        }
        v.iter().map(|t| p.num("header", *n, t, key)).collect::<Result<Vec<_>>>().map(Some)
    }

    fn required(&self, p: &Parser, key: &str, count: usize) -> Result<Vec<f64>> {
        self.nums(p, key, count)?.ok_or_else(|| p.err("header", 0, format!("missing '{key}'")))
    }
}

fn parse_buses(p: &Parser, lines: &[(usize, Vec<&str>)]) -> Result<(Vec<String>, usize)> {
    let mut names = Vec::new();
    let mut slack = None;
    for (n, toks) in lines {
        p.arity("buses", *n, toks, 1, 2, "<name> [slack]")?;
        if names.contains(&toks[0].to_string()) {
            return Err(p.err("buses", *n, format!("duplicate bus '{}'", toks[0])));
        }
        if toks.len() == 2 {
            if toks[1] != "slack" {
                return Err(p.err("buses", *n, format!("unknown bus flag '{}'", toks[1])));
            }
            if slack.is_some() {
                return Err(p.err("buses", *n, "second slack bus"));
            }
            slack = Some(names.len());
        }
        names.push(toks[0].to_string());
    }
    let slack = slack.ok_or_else(|| p.err("buses", 0, "no slack bus"))?;
    Ok((names, slack))
}

fn bus_of(p: &Parser, section: &str, n: usize, names: &[String], tok: &str) -> Result<usize> {
    names.iter().position(|b| b == tok).ok_or_else(|| p.err(section, n, format!("unknown bus '{tok}'")))
}

fn error_component(names: &mut Vec<String>, tag: &str) -> usize {
    match names.iter().position(|c| c == tag) {
        Some(i) => i,
        None => {
            names.push(tag.to_string());
            names.len() - 1
        }
    }
}

fn distribution(p: &Parser, h: &Header, s: &Sections) -> Result<DistributionCase> {
    let base = h.required(p, "base_kva", 1)?[0];
    if !(base > 0.0) {
        return Err(p.err("header", h.values["base_kva"].0, "base_kva must be positive"));
    }
    let v_slack = h.nums(p, "v_slack", 1)?.map_or(1.0, |v| v[0]);
    let lim = h.nums(p, "v_limits", 2)?.unwrap_or_else(|| vec![0.95, 1.05]);
    let prices = match h.nums(p, "prices", 4)? {
        Some(v) => CostPrices { a1: v[0], a2: v[1], a3: v[2], a4: v[3] },
        None => CostPrices::default(),
    };
    let (bus_names, slack) = parse_buses(p, &s.buses)?;

    let mut lines = Vec::new();
    for (n, toks) in &s.lines {
        p.arity("lines", *n, toks, 4, 4, "<from> <to> <r> <x>")?;
        lines.push(FeederLine {
            from: bus_of(p, "lines", *n, &bus_names, toks[0])?,
            to: bus_of(p, "lines", *n, &bus_names, toks[1])?,
            r: p.num("lines", *n, toks[2], "r")?,
            x: p.num("lines", *n, toks[3], "x")?,
        });
    }

    let mut error_names = Vec::new();
    let mut loads = Vec::new();
    let mut inverters = Vec::new();
    let mut storage = Vec::new();
    for (n, toks) in &s.devices {
        let (pos, opts) = split_options(toks);
        let sec = "devices";
        match pos[0] {
            "load" => {
                p.arity(sec, *n, &pos, 5, 5, "load <name> <bus> <p_kw> <q_kvar> [error=<c>]")?;
                loads.push(Load {
                    name: pos[1].into(),
                    bus: bus_of(p, sec, *n, &bus_names, pos[2])?,
                    p: p.num(sec, *n, pos[3], "p")? / base,
                    q: p.num(sec, *n, pos[4], "q")? / base,
                    xi: opts.get("error").map(|c| error_component(&mut error_names, c)),
                });
            }
            "pv" => {
                p.arity(sec, *n, &pos, 5, 5, "pv <name> <bus> <s_kva> <pf> error=<c>")?;
                let c = opts.get("error").ok_or_else(|| p.err(sec, *n, "pv needs error=<component>"))?;
                inverters.push(ResInverter {
                    name: pos[1].into(),
                    bus: bus_of(p, sec, *n, &bus_names, pos[2])?,
                    s_max: p.num(sec, *n, pos[3], "s")? / base,
                    power_factor: p.num(sec, *n, pos[4], "pf")?,
                    xi: error_component(&mut error_names, c),
                });
            }
            "storage" => {
                p.arity(sec, *n, &pos, 6, 6, "storage <name> <bus> <capacity_kwh> <ratio> <soc0_kwh>")?;
                let cap = p.num(sec, *n, pos[3], "capacity")? / base;
                let ratio = p.num(sec, *n, pos[4], "ratio")?;
                let b0 = p.num(sec, *n, pos[5], "soc0")? / base;
                storage.push(StorageUnit::with_power_ratio(pos[1], bus_of(p, sec, *n, &bus_names, pos[2])?, cap, ratio, b0));
            }
            other => return Err(p.err(sec, *n, format!("unknown distribution device '{other}'"))),
        }
    }

    let monitored = match h.values.get("monitored") {
        Some((n, v)) => Some(v.iter().map(|b| bus_of(p, "header", *n, &bus_names, b)).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let feeder = DistributionFeeder::new(bus_names, slack, lines, v_slack, lim[0], lim[1])?;
    let case = DistributionCase {
        name: h.name.clone(),
        base_kva: base,
        feeder,
        loads,
        inverters,
        storage,
        error_names,
        monitored,
        prices,
    };
    case.validate()?;
    Ok(case)
}

fn transmission(p: &Parser, h: &Header, s: &Sections) -> Result<TransmissionCase> {
    let base = h.required(p, "base_mva", 1)?[0];
    if !(base > 0.0) {
        return Err(p.err("header", h.values["base_mva"].0, "base_mva must be positive"));
    }
    let (bus_names, slack) = parse_buses(p, &s.buses)?;

    let mut lines = Vec::new();
    let mut dro_lines = Vec::new();
    for (n, toks) in &s.lines {
        p.arity("lines", *n, toks, 5, 6, "<name> <from> <to> <x> <limit_mw> [risk]")?;
        if toks.len() == 6 {
            if toks[5] != "risk" {
                return Err(p.err("lines", *n, format!("unknown line flag '{}'", toks[5])));
            }
            dro_lines.push(lines.len());
        }
        let limit = p.num("lines", *n, toks[4], "limit")?;
        if !(limit > 0.0) {
            return Err(p.err("lines", *n, "line limit must be positive"));
        }
        lines.push(TransLine {
            name: toks[0].into(),
            from: bus_of(p, "lines", *n, &bus_names, toks[1])?,
            to: bus_of(p, "lines", *n, &bus_names, toks[2])?,
            x: p.num("lines", *n, toks[3], "x")?,
            limit: limit / base,
        });
    }

    let mut generators = Vec::new();
    let mut winds = Vec::new();
    let mut wind_std = Vec::new();
    let mut loads = Vec::new();
    for (n, toks) in &s.devices {
        let sec = "devices";
        match toks[0] {
            "gen" => {
                p.arity(sec, *n, toks, 8, 8, "gen <name> <bus> <p_min> <p_max> <c1> <c2> <c3>")?;
                generators.push(Generator {
                    name: toks[1].into(),
                    bus: bus_of(p, sec, *n, &bus_names, toks[2])?,
                    p_min: p.num(sec, *n, toks[3], "p_min")? / base,
                    p_max: p.num(sec, *n, toks[4], "p_max")? / base,
                    c1: p.num(sec, *n, toks[5], "c1")? * base * base,
                    c2: p.num(sec, *n, toks[6], "c2")? * base,
                    c3: p.num(sec, *n, toks[7], "c3")?,
                });
            }
            "wind" => {
                p.arity(sec, *n, toks, 5, 5, "wind <name> <bus> <p_nom_mw> <std_mw>")?;
                winds.push(WindFarm {
                    name: toks[1].into(),
                    bus: bus_of(p, sec, *n, &bus_names, toks[2])?,
                    p_nom: p.num(sec, *n, toks[3], "p_nom")? / base,
                    xi: winds.len(),
                });
                wind_std.push(p.num(sec, *n, toks[4], "std")? / base);
            }
            "load" => {
                p.arity(sec, *n, toks, 4, 4, "load <name> <bus> <p_mw>")?;
                loads.push(TransLoad {
                    name: toks[1].into(),
                    bus: bus_of(p, sec, *n, &bus_names, toks[2])?,
                    p: p.num(sec, *n, toks[3], "p")? / base,
                });
            }
            other => return Err(p.err(sec, *n, format!("unknown transmission device '{other}'"))),
        }
    }
    let grid = TransmissionGrid::new(bus_names, slack, lines, base)?;
    let case = TransmissionCase { name: h.name.clone(), base_mva: base, grid, generators, winds, loads, dro_lines, wind_std };
    case.validate()?;
    Ok(case)
}

/// Parse a case from text; `file` only labels error messages.
pub fn parse_case(text: &str, file: &str) -> Result<GridCase> {
    let p = Parser { file };
    let s = split_sections(&p, text)?;
    let h = parse_header(&p, &s.header)?;
    match h.kind {
        Kind::Distribution => distribution(&p, &h, &s).map(GridCase::Distribution),
        Kind::Transmission => transmission(&p, &h, &s).map(GridCase::Transmission),
    }
}

pub fn load_case(path: &Path) -> Result<GridCase> {
    let text = std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_case(&text, &path.display().to_string())
}

/// Cases shipped with the crate, by name.
pub fn bundled_case(name: &str) -> Result<GridCase> {
    let text = match name {
        "feeder37" => include_str!("../../../../cases/feeder37.case"),
        "stressed" => include_str!("../../../../cases/stressed.case"),
        "trans14" => include_str!("../../../../cases/trans14.case"),
        other => return Err(Error::Config(format!("no bundled case named '{other}' (try feeder37, stressed, trans14)"))),
    };
    parse_case(text, &format!("{name}.case"))
}

pub const BUNDLED_CASES: [&str; 3] = ["feeder37", "stressed", "trans14"];


#[cfg(test)]
mod bundled {
    use super::*;

    #[test]
    fn feeder37_devices() {
        let c = bundled_case("feeder37").unwrap();
        let d = c.as_distribution().unwrap();
        assert_eq!(d.feeder.n_bus(), 37);
        assert_eq!(d.inverters.len(), 21);
        assert_eq!(d.storage.len(), 7);
        assert!(d.storage.iter().all(|s| s.b_min == 0.0 && (s.p_max - 0.1 * s.b_max).abs() < 1e-15));
        assert_eq!(d.n_xi(), 21);
    }

    #[test]
    fn trans14_wind() {
        let c = bundled_case("trans14").unwrap();
        let t = c.as_transmission().unwrap();
        let feed_in: Vec<f64> = t.winds.iter().map(|w| w.p_nom * t.base_mva).collect();
        assert_eq!(feed_in, vec![500.0, 500.0, 800.0]);
        assert_eq!(t.dro_lines.len(), 5);
        assert!(t.grid.n_bus() <= 30);
    }

    #[test]
    fn every_bundled_case_parses() {
        for name in BUNDLED_CASES {
            assert_eq!(bundled_case(name).unwrap().name(), name);
        }
        assert!(bundled_case("nope").is_err());
    }
}
