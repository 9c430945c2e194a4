//! Walker metric specifications and chart points.
//!
//! A spec fixes the screen dimension `n`, the symmetric screen metric
//! `g_ij(x1..x{n+1})` and the profile `f(x0..x{n+1})` of the metric
//!
//! ```text
//! g = 2 dx0 dx{n+1} + sum_ij g_ij dx^i dx^j + f (dx{n+1})^2
//! ```
//!
//! on a single chart with coordinates `x0, x1, .., x{n+1}`.
//!
//! The on-disk format is line-oriented `key = value`:
//!
//! ```text
//! # comment
//! n = 2
//! f = "x1^2 + x2^2"
//! g_1_1 = "1 + x2^2"        # optional, defaults to the identity
//! aliases = "u=x0, v=x3"    # optional coordinate aliases
//! ```
//!
//! `g_<i>_<j>` keys require `1 <= i <= j <= n`; the lower triangle is filled
//! in by symmetry. Screen-metric entries must not reference `x0`.

use crate::error::{Error, Result};
use crate::expr::{parse_expr_with_aliases, Expr};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// A point of the chart: coordinates `x0 .. x{n+1}`, so `n + 2` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::Point(format!(
                "a chart point needs at least 3 coordinates, got {}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Point(format!("non-finite coordinate {bad}")));
        }
        Ok(Point { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Screen dimension n implied by the arity.
    pub fn screen_dim(&self) -> usize {
        self.coords.len() - 2
    }

    pub fn inf_norm(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// The point shifted by `h` along coordinate `k`.
    pub fn shifted(&self, k: usize, h: f64) -> Point {
        let mut q = self.clone();
        q.coords[k] += h;
        q
    }

    /// The point shifted by `h * d` for a coordinate direction vector `d`.
    pub fn shifted_along(&self, d: &[f64], h: f64) -> Point {
        let mut q = self.clone();
        for (c, di) in q.coords.iter_mut().zip(d) {
            *c += h * di;
        }
        q
    }
}

impl fmt::Display for Point {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| format!("{c}")).collect();
        write!(out, "({})", parts.join(", "))
    }
}

/// A validated Walker metric in normal-form coordinates.
#[derive(Debug, Clone)]
pub struct MetricSpec {
    n: usize,
    gij: Vec<Vec<Arc<Expr>>>,
    f: Arc<Expr>,
    /// Normalized one-line echo of the spec, used in reports.
    echo: String,
}

impl MetricSpec {
    /// Build a spec from parsed expressions, enforcing the normal-form
    /// invariants: `gij` is n x n symmetric and independent of `x0`.
    pub fn new(n: usize, gij: Vec<Vec<Arc<Expr>>>, f: Arc<Expr>) -> Result<Self> {
        if n < 1 {
            return Err(Error::Spec(format!("screen dimension must be >= 1, got {n}")));
        }
        if gij.len() != n || gij.iter().any(|row| row.len() != n) {
            return Err(Error::Spec(format!("gij must be an {n} x {n} array")));
        }
        for (i, row) in gij.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if e.depends_on(0) {
                    return Err(Error::Spec(format!(
                        "g_{}_{} depends on x0; screen-metric entries may only use x1..x{}",
                        i + 1,
                        j + 1,
                        n + 1
                    )));
                }
                if let Some(m) = e.max_coord() {
                    if m > n + 1 {
                        return Err(Error::Spec(format!(
                            "g_{}_{} references x{m}, beyond x{}",
                            i + 1,
                            j + 1,
                            n + 1
                        )));
                    }
                }
                if !format!("{e}").eq(&format!("{}", gij[j][i])) && !exprs_identical(e, &gij[j][i]) {
                    return Err(Error::Spec(format!(
                        "gij is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if let Some(m) = f.max_coord() {
            if m > n + 1 {
                return Err(Error::Spec(format!("f references x{m}, beyond x{}", n + 1)));
            }
        }
        let echo = render_echo(n, &gij, &f);
        Ok(MetricSpec { n, gij, f, echo })
    }

    /// Minkowski space in Walker coordinates: `f = 0`, `gij = I`.
    pub fn flat(n: usize) -> Self {
        MetricSpec::new(n, identity_gij(n), Expr::zero()).expect("flat spec is valid")
    }

    /// pp-wave spec: identity screen metric with the given profile.
    pub fn pp_wave(n: usize, f_text: &str) -> Result<Self> {
        let f = parse_expr_with_aliases(f_text, n, &HashMap::new())?;
        MetricSpec::new(n, identity_gij(n), f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Manifold dimension n + 2.
    pub fn dim(&self) -> usize {
        self.n + 2
    }

    pub fn f(&self) -> &Arc<Expr> {
        &self.f
    }

    /// Screen-metric entry, 0-based (`g(0,0)` is the paper's `g_11`).
    pub fn g(&self, i: usize, j: usize) -> &Arc<Expr> {
        &self.gij[i][j]
    }

    pub fn echo(&self) -> &str {
        &self.echo
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::Point(format!(
                "point has {} coordinates but the spec needs {}",
                p.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn exprs_identical(a: &Expr, b: &Expr) -> bool {
    std::ptr::eq(a, b)
}

fn identity_gij(n: usize) -> Vec<Vec<Arc<Expr>>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Expr::one() } else { Expr::zero() })
                .collect()
        })
        .collect()
}

fn render_echo(n: usize, gij: &[Vec<Arc<Expr>>], f: &Arc<Expr>) -> String {
    let mut parts = vec![format!("n={n}"), format!("f=\"{f}\"")];
    for i in 0..n {
        for j in i..n {
            let e = &gij[i][j];
            let trivial = if i == j { e.is_num(1.0) } else { e.is_num(0.0) };
            if !trivial {
                parts.push(format!("g_{}_{}=\"{e}\"", i + 1, j + 1));
            }
        }
    }
    parts.join("; ")
}

/// Parse a metric-spec document in the external key-value format.
pub fn parse_metric_spec(document: &str) -> Result<MetricSpec> {
    let mut n: Option<usize> = None;
    let mut f_text: Option<String> = None;
    let mut g_texts: HashMap<(usize, usize), String> = HashMap::new();
    let mut alias_text: Option<String> = None;

    for (lineno, raw) in document.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Spec(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "n" => {
                if n.is_some() {
                    return Err(Error::Spec(format!("line {}: duplicate key `n`", lineno + 1)));
                }
                let v: usize = value.parse().map_err(|_| {
                    Error::Spec(format!("line {}: `n` must be a positive integer", lineno + 1))
                })?;
                n = Some(v);
            }
            "f" => {
                if f_text.is_some() {
                    return Err(Error::Spec(format!("line {}: duplicate key `f`", lineno + 1)));
                }
                f_text = Some(unquote(value, lineno)?);
            }
            "aliases" => {
                if alias_text.is_some() {
                    return Err(Error::Spec(format!(
                        "line {}: duplicate key `aliases`",
                        lineno + 1
                    )));
                }
                alias_text = Some(unquote(value, lineno)?);
            }
            _ => {
                let (i, j) = parse_g_key(key, lineno)?;
                if g_texts.insert((i, j), unquote(value, lineno)?).is_some() {
                    return Err(Error::Spec(format!(
                        "line {}: duplicate key `{key}`",
                        lineno + 1
                    )));
                }
            }
        }
    }

    let n = n.ok_or_else(|| Error::Spec("missing key `n`".into()))?;
    if n < 1 {
        return Err(Error::Spec("`n` must be >= 1".into()));
    }
    let f_text = f_text.ok_or_else(|| Error::Spec("missing key `f`".into()))?;

    let aliases = parse_aliases(alias_text.as_deref(), n)?;

    for &(i, j) in g_texts.keys() {
        if i < 1 || j < 1 || i > n || j > n {
            return Err(Error::Spec(format!(
                "g_{i}_{j} is out of range for screen dimension {n}"
            )));
        }
        if i > j {
            return Err(Error::Spec(format!(
                "g_{i}_{j} has i > j; specify the upper triangle (g_{j}_{i}) only"
            )));
        }
    }

    let mut gij = identity_gij(n);
    for ((i, j), text) in &g_texts {
        let e = parse_expr_with_aliases(text, n, &aliases)
            .map_err(|err| Error::Spec(format!("g_{i}_{j}: {err}")))?;
        gij[i - 1][j - 1] = e.clone();
        gij[j - 1][i - 1] = e;
    }
    let f = parse_expr_with_aliases(&f_text, n, &aliases)
        .map_err(|err| Error::Spec(format!("f: {err}")))?;

    MetricSpec::new(n, gij, f)
}

/// Read and parse a metric-spec file.
pub fn load_metric_spec(path: &std::path::Path) -> Result<MetricSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_metric_spec(&text)
}

fn unquote(value: &str, lineno: usize) -> Result<String> {
    let v = value.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        Ok(v[1..v.len() - 1].to_string())
    } else {
        Err(Error::Spec(format!(
            "line {}: expected a quoted value, got `{v}`",
            lineno + 1
        )))
    }
}

fn parse_g_key(key: &str, lineno: usize) -> Result<(usize, usize)> {
    let parts: Vec<&str> = key.split('_').collect();
    if parts.len() == 3 && parts[0] == "g" {
        if let (Ok(i), Ok(j)) = (parts[1].parse(), parts[2].parse()) {
            return Ok((i, j));
        }
    }
    Err(Error::Spec(format!(
        "line {}: unknown key `{key}` (expected n, f, aliases or g_<i>_<j>)",
        lineno + 1
    )))
}

fn parse_aliases(text: Option<&str>, n: usize) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    let Some(text) = text else {
        return Ok(map);
    };
    for pair in text.split(',') {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let (name, target) = pair
            .split_once('=')
            .ok_or_else(|| Error::Spec(format!("alias `{pair}` is not of the form name=xK")))?;
        let name = name.trim().to_string();
        let target = target.trim();
        let idx: usize = target
            .strip_prefix('x')
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::Spec(format!("alias target `{target}` is not a coordinate")))?;
        if idx > n + 1 {
            return Err(Error::Spec(format!(
                "alias target `{target}` is out of range for n = {n}"
            )));
        }
        if name.is_empty() || !name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return Err(Error::Spec(format!("invalid alias name `{name}`")));
        }
        if map.insert(name.clone(), idx).is_some() {
            return Err(Error::Spec(format!("duplicate alias `{name}`")));
        }
    }
    Ok(map)
}
