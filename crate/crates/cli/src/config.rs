//! Run parameters: `key=value` files, flag overrides and typed parsing.

use std::fmt;
use std::path::Path;

use g2fermion::modular::{GElement, Generator, SL2Element};
use g2fermion::qseries::{ModularParam, SeriesPolicy, TwistData};
use g2fermion::sewing::{SewingConfig, SurfacePoint, Torus, Xi};
use num_complex::Complex64;

/// Recognized keys with their defaults, in echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("tau1", "i"),
    ("tau2", "i"),
    ("eps", "0"),
    ("alpha1", "0"),
    ("beta1", "0"),
    ("alpha2", "0"),
    ("beta2", "0"),
    ("xi", "+i"),
    ("M", "16"),
    ("W", "4"),
    ("tol", "1e-13"),
    ("max_terms", "4096"),
    ("torus", "1"),
    ("w", ""),
    ("z", ""),
    ("order", "6"),
    ("word", "g1S"),
    ("check_tol", ""),
    ("eps_grid", "16"),
    ("scan_extent", "0.5"),
    ("format", "json"),
    ("output", "-"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub key: String,
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}, key '{}': {}", self.key, self.msg),
            None => write!(f, "key '{}': {}", self.key, self.msg),
        }
    }
}

impl std::error::Error for ParseError {}

fn perr(key: &str, line: Option<usize>, msg: impl Into<String>) -> ParseError {
    ParseError { key: key.to_string(), line, msg: msg.into() }
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Raw string values keyed by name, remembering the file line they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: Vec<(String, String, Option<usize>)>,
}

impl RawConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.iter().rev().find(|(k, _, _)| k == key).and_then(|(_, _, l)| *l)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParseError> {
        if !known(key) {
            return Err(perr(key, None, "unknown key"));
        }
        self.entries.push((key.to_string(), value.to_string(), None));
        Ok(())
    }

    /// Effective value of every key (explicit or default), in `KEYS` order.
    pub fn effective(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|(k, d)| (*k, self.get(k).unwrap_or(d).to_string())).collect()
    }

    /// `self` with `flags` taking precedence.
    pub fn overridden_by(&self, flags: &RawConfig) -> RawConfig {
        let mut out = self.clone();
        out.entries.extend(flags.entries.iter().cloned());
        out
    }
}

/// Parse a `key=value` document. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<RawConfig, ParseError> {
    let mut cfg = RawConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(perr(line, Some(i + 1), "expected key=value"));
        };
        let k = k.trim();
        if !known(k) {
            return Err(perr(k, Some(i + 1), "unknown key"));
        }
        cfg.entries.push((k.to_string(), v.trim().to_string(), Some(i + 1)));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RawConfig, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|e| perr("config", None, format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Complex literal: `0.3`, `i`, `-2i`, `1.2i`, `0.3+0.9i`, `1e-3-4e-4i`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&p| (bytes[p] == b'+' || bytes[p] == b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(p) => (body[..p].parse().ok()?, &body[p..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse().ok()?,
    };
    Some(Complex64::new(re, im))
}

fn parse_torus(s: &str) -> Option<Torus> {
    match s.trim() {
        "1" => Some(Torus::One),
        "2" => Some(Torus::Two),
        _ => None,
    }
}

/// Comma-separated `torus:complex` list, e.g. `1:0.7+0.3i,2:-0.4i`.
fn parse_points(s: &str) -> Option<Vec<SurfacePoint>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (t, z) = p.split_once(':')?;
            Some(SurfacePoint::new(parse_torus(t)?, parse_complex(z)?))
        })
        .collect()
}

/// Comma-separated generators: `g1T`, `g1S`, `g2T`, `g2S`, `b`, or `g1:a:b:c:d`.
fn parse_word(s: &str) -> Option<GElement> {
    let mut word = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let g = match tok {
            "b" => Generator::Beta,
            _ => {
                let (which, rest) = tok.split_at(tok.len().min(2));
                let m = match rest {
                    "T" => SL2Element::T,
                    "S" => SL2Element::S,
                    _ => {
                        let v: Vec<i64> = rest.strip_prefix(':')?.split(':').map(|x| x.parse().ok()).collect::<Option<_>>()?;
                        if v.len() != 4 {
                            return None;
                        }
                        SL2Element::new(v[0], v[1], v[2], v[3]).ok()?
                    }
                };
                match which {
                    "g1" => Generator::Gamma1(m),
                    "g2" => Generator::Gamma2(m),
                    _ => return None,
                }
            }
        };
        word.push(g);
    }
    Some(GElement::new(word))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Fully typed parameters of a run.
#[derive(Debug, Clone)]
pub struct Params {
    pub tau1: ModularParam,
    pub tau2: ModularParam,
    pub eps: Complex64,
    pub t1: TwistData,
    pub t2: TwistData,
    pub xi: Xi,
    pub m: usize,
    pub weight_cap: f64,
    pub policy: SeriesPolicy,
    pub torus: Torus,
    pub ws: Vec<SurfacePoint>,
    pub zs: Vec<SurfacePoint>,
    pub order: usize,
    pub word: GElement,
    pub check_tol: Option<f64>,
    pub eps_grid: usize,
    pub scan_extent: f64,
    pub format: Format,
    pub output: String,
    /// Effective string values, echoed into artifacts.
    pub echo: Vec<(&'static str, String)>,
}

impl Params {
    pub fn sewing(&self) -> SewingConfig {
        SewingConfig::new(self.tau1, self.tau2, self.eps)
            .with_xi(self.xi)
            .with_order(self.m)
            .with_policy(self.policy)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ParseError> {
        let val = |k: &str| -> String {
            raw.get(k).map(str::to_string).unwrap_or_else(|| KEYS.iter().find(|(x, _)| *x == k).unwrap().1.to_string())
        };
        let bad = |k: &str, what: &str| perr(k, raw.line(k), format!("cannot parse '{}' as {what}", val(k)));
        let num = |k: &str| val(k).trim().parse::<f64>().map_err(|_| bad(k, "a number"));
        let int = |k: &str| val(k).trim().parse::<usize>().map_err(|_| bad(k, "a non-negative integer"));
        let cx = |k: &str| parse_complex(&val(k)).ok_or_else(|| bad(k, "a complex number"));
        let tau = |k: &str| ModularParam::new(cx(k)?).map_err(|e| perr(k, raw.line(k), e.to_string()));
        let twist = |a: &str, b: &str| {
            let (x, y) = (num(a)?, num(b)?);
            TwistData::new(x.rem_euclid(1.0), y.rem_euclid(1.0)).map_err(|e| perr(a, raw.line(a), e.to_string()))
        };
        let xi = match val("xi").trim() {
            "+i" | "i" => Xi::PlusI,
            "-i" => Xi::MinusI,
            _ => return Err(bad("xi", "+i or -i")),
        };
        let tol = num("tol")?;
        let max_terms = int("max_terms")?;
        let policy = SeriesPolicy::new(tol, max_terms).map_err(|e| perr("tol", raw.line("tol"), e.to_string()))?;
        let m = int("M")?;
        if m == 0 {
            return Err(perr("M", raw.line("M"), "truncation order must be at least 1"));
        }
        let check_tol = match val("check_tol").trim() {
            "" => None,
            _ => Some(num("check_tol")?),
        };
        let format = match val("format").trim() {
            "json" => Format::Json,
            "csv" => Format::Csv,
            _ => return Err(bad("format", "json or csv")),
        };
        Ok(Self {
            tau1: tau("tau1")?,
            tau2: tau("tau2")?,
            eps: cx("eps")?,
            t1: twist("alpha1", "beta1")?,
            t2: twist("alpha2", "beta2")?,
            xi,
            m,
            weight_cap: num("W")?,
            policy,
            torus: parse_torus(&val("torus")).ok_or_else(|| bad("torus", "1 or 2"))?,
            ws: parse_points(&val("w")).ok_or_else(|| bad("w", "a list of torus:complex points"))?,
            zs: parse_points(&val("z")).ok_or_else(|| bad("z", "a list of torus:complex points"))?,
            order: int("order")?,
            word: parse_word(&val("word")).ok_or_else(|| bad("word", "a generator word"))?,
            check_tol,
            eps_grid: int("eps_grid")?,
            scan_extent: num("scan_extent")?,
            format,
            output: val("output"),
            echo: raw.effective(),
        })
    }
}
