//! Text form of an [`Autocorrelation`].
//!
//! ```text
//! ldcf-autocorr v1
//! radius R
//! channels L U V ...
//! counts
//! <2R+1 rows of 2R+1 integers>
//! channel L
//! <2R+1 rows of 2R+1 reals>
//! ...
//! ```
//!
//! Rows run over `Δy = -R..=R`, columns over `Δx = -R..=R`. Reals use the
//! shortest representation that parses back to the same `f64`.

use std::fmt::Write;

use super::{Autocorrelation, LinStatsError};

const HEADER: &str = "ldcf-autocorr v1";

fn write_grid<T: std::fmt::Display>(out: &mut String, grid: &[T], side: usize) {
    for row in grid.chunks(side) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

pub fn format_autocorr(ac: &Autocorrelation) -> String {
    let side = ac.side();
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "radius {}", ac.radius());
    let _ = writeln!(out, "channels {}", ac.labels().join(" "));
    let _ = writeln!(out, "counts");
    write_grid(&mut out, ac.counts(), side);
    for (label, grid) in ac.labels().iter().zip(ac.grids()) {
        let _ = writeln!(out, "channel {label}");
        write_grid(&mut out, grid, side);
    }
    out
}

fn format_err(msg: impl Into<String>) -> LinStatsError {
    LinStatsError::Format(msg.into())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), LinStatsError> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => return Ok((i + 1, l.trim())),
                None => return Err(format_err("unexpected end of input")),
            }
        }
    }

    fn keyword(&mut self, key: &str) -> Result<&'a str, LinStatsError> {
        let (n, l) = self.next()?;
        l.strip_prefix(key)
            .filter(|rest| rest.is_empty() || rest.starts_with(' '))
            .map(str::trim)
            .ok_or_else(|| format_err(format!("line {n}: expected `{key}`")))
    }

    fn grid<T: std::str::FromStr>(&mut self, side: usize) -> Result<Vec<T>, LinStatsError> {
        let mut out = Vec::with_capacity(side * side);
        for _ in 0..side {
            let (n, l) = self.next()?;
            let row: Vec<T> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| format_err(format!("line {n}: bad number {t:?}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != side {
                return Err(format_err(format!("line {n}: expected {side} values, found {}", row.len())));
            }
            out.extend(row);
        }
        Ok(out)
    }
}

pub fn parse_autocorr(text: &str) -> Result<Autocorrelation, LinStatsError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, first) = lines.next()?;
    if first != HEADER {
        return Err(format_err(format!("expected header `{HEADER}`")));
    }
    let radius: usize = lines
        .keyword("radius")?
        .parse()
        .map_err(|_| format_err("bad radius"))?;
    if radius > 1024 {
        return Err(format_err(format!("implausible radius {radius}")));
    }
    let labels: Vec<String> = lines.keyword("channels")?.split_whitespace().map(String::from).collect();
    let side = 2 * radius + 1;
    lines.keyword("counts")?;
    let counts: Vec<u64> = lines.grid(side)?;
    let mut grids = Vec::with_capacity(labels.len());
    for label in &labels {
        let got = lines.keyword("channel")?;
        if got != label {
            return Err(format_err(format!("expected channel {label}, found {got}")));
        }
        let g: Vec<f64> = lines.grid(side)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(format_err(format!("non-finite value in channel {label}")));
        }
        grids.push(g);
    }
    Autocorrelation::new(radius, labels, grids, counts)
}
