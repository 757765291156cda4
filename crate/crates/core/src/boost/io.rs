//! Binary ensemble format and its lossless text dump.
//!
//! Binary layout, all integers little-endian `u64` unless noted:
//! magic (8 bytes), version `u32`, metadata count then length-prefixed
//! key/value UTF-8 strings, dim, geometry flag (`u8`) and four fields,
//! tree count, one `f64` threshold per tree, then per tree a node count and
//! nodes tagged 0 (leaf), 1 (orthogonal) or 2 (oblique).

use std::collections::BTreeMap;

use super::{BoostError, BoostedEnsemble, FeatureGeometry, Node, Split, Tree};

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"LDCFENS1";
const VERSION: u32 = 1;
const TEXT_HEADER: &str = "ldcf-ensemble v1";

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

pub fn encode_ensemble(ens: &BoostedEnsemble) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(ENSEMBLE_MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    w.u64(ens.metadata.len());
    for (k, v) in &ens.metadata {
        w.str(k);
        w.str(v);
    }
    w.u64(ens.dim);
    match ens.geometry {
        Some(g) => {
            w.u8(1);
            for v in [g.channels, g.height, g.width, g.shrink] {
                w.u64(v);
            }
        }
        None => w.u8(0),
    }
    w.u64(ens.trees.len());
    for &t in &ens.thresholds {
        w.f64(t);
    }
    for tree in &ens.trees {
        w.u64(tree.nodes.len());
        for node in &tree.nodes {
            match node {
                Node::Leaf { value } => {
                    w.u8(0);
                    w.f64(*value);
                }
                Node::Internal { split, left, right } => {
                    match split {
                        Split::Orthogonal { feature, threshold } => {
                            w.u8(1);
                            w.u64(*feature);
                            w.f64(*threshold);
                        }
                        Split::Oblique {
                            channel,
                            top,
                            left,
                            ph,
                            pw,
                            w: dir,
                            threshold,
                        } => {
                            w.u8(2);
                            for v in [*channel, *top, *left, *ph, *pw] {
                                w.u64(v);
                            }
                            for &v in dir {
                                w.f64(v);
                            }
                            w.f64(*threshold);
                        }
                    }
                    w.u64(*left);
                    w.u64(*right);
                }
            }
        }
    }
    w.0
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn truncated() -> BoostError {
    BoostError::Format("truncated ensemble".into())
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], BoostError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, BoostError> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<usize, BoostError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| BoostError::Format(format!("value {v} too large")))
    }
    /// A count of items each at least `min_bytes` long, checked against the
    /// remaining input so corrupt counts cannot trigger huge allocations.
    fn count(&mut self, min_bytes: usize) -> Result<usize, BoostError> {
        let n = self.u64()?;
        if n.saturating_mul(min_bytes) > self.buf.len() - self.pos {
            return Err(truncated());
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64, BoostError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn str(&mut self) -> Result<String, BoostError> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| BoostError::Format("metadata is not UTF-8".into()))
    }
}

pub fn decode_ensemble(bytes: &[u8]) -> Result<BoostedEnsemble, BoostError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok() != Some(&ENSEMBLE_MAGIC[..]) {
        return Err(BoostError::Format("not an ensemble file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(BoostError::Format(format!("unsupported ensemble version {version}")));
    }
    let mut metadata = BTreeMap::new();
    for _ in 0..r.count(16)? {
        let k = r.str()?;
        let v = r.str()?;
        metadata.insert(k, v);
    }
    let dim = r.u64()?;
    let geometry = match r.u8()? {
        0 => None,
        1 => Some(FeatureGeometry {
            channels: r.u64()?,
            height: r.u64()?,
            width: r.u64()?,
            shrink: r.u64()?,
        }),
        t => return Err(BoostError::Format(format!("bad geometry flag {t}"))),
    };
    let n_trees = r.count(8)?;
    let thresholds = (0..n_trees).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = r.count(9)?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let tag = r.u8()?;
            if tag == 0 {
                nodes.push(Node::Leaf { value: r.f64()? });
                continue;
            }
            let split = match tag {
                1 => Split::Orthogonal {
                    feature: r.u64()?,
                    threshold: r.f64()?,
                },
                2 => {
                    let (channel, top, left, ph, pw) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?, r.u64()?);
                    let len = ph.checked_mul(pw).filter(|&l| l.saturating_mul(8) <= bytes.len()).ok_or_else(truncated)?;
                    let w = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
                    Split::Oblique {
                        channel,
                        top,
                        left,
                        ph,
                        pw,
                        w,
                        threshold: r.f64()?,
                    }
                }
                t => return Err(BoostError::Format(format!("bad node tag {t}"))),
            };
            nodes.push(Node::Internal {
                split,
                left: r.u64()?,
                right: r.u64()?,
            });
        }
        trees.push(Tree { nodes });
    }
    if r.pos != bytes.len() {
        return Err(BoostError::Format("trailing bytes after ensemble".into()));
    }
    let ens = BoostedEnsemble {
        trees,
        thresholds,
        dim,
        geometry,
        metadata,
    };
    ens.validate()?;
    Ok(ens)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '=' => out.push_str("\\="),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, BoostError> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('=') => out.push('='),
            _ => return Err(BoostError::Format(format!("bad escape in {s:?}"))),
        }
    }
    Ok(out)
}

/// Splits at the first `=` not preceded by a backslash escape.
fn split_meta(s: &str) -> Option<(&str, &str)> {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'=' => return Some((&s[..i], &s[i + 1..])),
            _ => i += 1,
        }
    }
    None
}

/// Text form with every real printed in shortest round-trip notation, so
/// `parse_ensemble_dump` recovers the ensemble exactly.
pub fn dump_ensemble(ens: &BoostedEnsemble) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "{TEXT_HEADER}");
    for (k, v) in &ens.metadata {
        let _ = writeln!(s, "meta {}={}", escape(k), escape(v));
    }
    let _ = writeln!(s, "dim {}", ens.dim);
    match ens.geometry {
        Some(g) => {
            let _ = writeln!(s, "geometry {} {} {} {}", g.channels, g.height, g.width, g.shrink);
        }
        None => {
            let _ = writeln!(s, "geometry none");
        }
    }
    let _ = writeln!(s, "trees {}", ens.trees.len());
    for (t, (tree, thr)) in ens.trees.iter().zip(&ens.thresholds).enumerate() {
        let _ = writeln!(s, "tree {t} nodes {} cascade {thr}", tree.nodes.len());
        for (i, node) in tree.nodes.iter().enumerate() {
            match node {
                Node::Leaf { value } => {
                    let _ = writeln!(s, "  {i} leaf {value}");
                }
                Node::Internal {
                    split: Split::Orthogonal { feature, threshold },
                    left,
                    right,
                } => {
                    let _ = writeln!(s, "  {i} ortho {feature} {threshold} {left} {right}");
                }
                Node::Internal {
                    split:
                        Split::Oblique {
                            channel,
                            top,
                            left: pl,
                            ph,
                            pw,
                            w,
                            threshold,
                        },
                    left,
                    right,
                } => {
                    let ws: Vec<String> = w.iter().map(f64::to_string).collect();
                    let _ = writeln!(s, "  {i} oblique {channel} {top} {pl} {ph} {pw} {threshold} {left} {right} {}", ws.join(" "));
                }
            }
        }
    }
    s
}

pub fn parse_ensemble_dump(text: &str) -> Result<BoostedEnsemble, BoostError> {
    let err = |line: usize, m: &str| BoostError::Format(format!("line {}: {m}", line + 1));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| BoostError::Format(format!("missing {what}")));
    let (_, header) = next("header")?;
    if header.trim() != TEXT_HEADER {
        return Err(BoostError::Format(format!("expected {TEXT_HEADER:?}")));
    }
    fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T, BoostError> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| BoostError::Format(format!("line {}: bad or missing number", line + 1)))
    }
    let mut metadata = BTreeMap::new();
    let (mut ln, mut line) = next("dim")?;
    while let Some(rest) = line.strip_prefix("meta ") {
        let (k, v) = split_meta(rest).ok_or_else(|| err(ln, "metadata needs key=value"))?;
        metadata.insert(unescape(k)?, unescape(v)?);
        (ln, line) = next("dim")?;
    }
    let mut tok = line.split_whitespace();
    if tok.next() != Some("dim") {
        return Err(err(ln, "expected dim"));
    }
    let dim: usize = num(tok.next(), ln)?;
    let (ln, line) = next("geometry")?;
    let tok: Vec<&str> = line.split_whitespace().collect();
    let geometry = match tok.as_slice() {
        ["geometry", "none"] => None,
        ["geometry", c, h, w, s] => Some(FeatureGeometry {
            channels: num(Some(c), ln)?,
            height: num(Some(h), ln)?,
            width: num(Some(w), ln)?,
            shrink: num(Some(s), ln)?,
        }),
        _ => return Err(err(ln, "expected geometry")),
    };
    let (ln, line) = next("trees")?;
    let n_trees: usize = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["trees", n] => num(Some(n), ln)?,
        _ => return Err(err(ln, "expected trees")),
    };
    let mut trees = Vec::new();
    let mut thresholds = Vec::new();
    for t in 0..n_trees {
        let (ln, line) = next("tree")?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        let (n_nodes, thr): (usize, f64) = match tok.as_slice() {
            ["tree", i, "nodes", n, "cascade", c] if num::<usize>(Some(i), ln)? == t => (num(Some(n), ln)?, num(Some(c), ln)?),
            _ => return Err(err(ln, "expected tree header")),
        };
        thresholds.push(thr);
        let mut nodes = Vec::new();
        for i in 0..n_nodes {
            let (ln, line) = next("node")?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.first().map(|s| s.parse::<usize>().ok()) != Some(Some(i)) {
                return Err(err(ln, "node index out of sequence"));
            }
            let node = match &tok[1..] {
                ["leaf", v] => Node::Leaf { value: num(Some(v), ln)? },
                ["ortho", f, th, l, r] => Node::Internal {
                    split: Split::Orthogonal {
                        feature: num(Some(f), ln)?,
                        threshold: num(Some(th), ln)?,
                    },
                    left: num(Some(l), ln)?,
                    right: num(Some(r), ln)?,
                },
                ["oblique", c, top, left, ph, pw, th, l, r, w @ ..] => Node::Internal {
                    split: Split::Oblique {
                        channel: num(Some(c), ln)?,
                        top: num(Some(top), ln)?,
                        left: num(Some(left), ln)?,
                        ph: num(Some(ph), ln)?,
                        pw: num(Some(pw), ln)?,
                        w: w.iter().map(|v| num(Some(v), ln)).collect::<Result<_, _>>()?,
                        threshold: num(Some(th), ln)?,
                    },
                    left: num(Some(l), ln)?,
                    right: num(Some(r), ln)?,
                },
                _ => return Err(err(ln, "bad node")),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing content"));
    }
    let ens = BoostedEnsemble {
        trees,
        thresholds,
        dim,
        geometry,
        metadata,
    };
    ens.validate()?;
    Ok(ens)
}
