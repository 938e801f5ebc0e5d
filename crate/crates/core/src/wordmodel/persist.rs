//! `.dtree` model files.
//!
//! ```text
//! # comment lines are ignored
//! version 1
//! max_depth 8
//! min_leaf 5
//! nodes 3
//! split <feature> <threshold>
//! leaf <label> <count_hello> <count_sorry> ... <count_none>
//! leaf ...
//! end
//! ```
//!
//! Nodes are listed in preorder (node, left subtree, right subtree).
//! Thresholds use the shortest decimal that parses back to the same `f64`.

use std::fmt::Write as _;

use super::tree::{DecisionTreeModel, Node, TreeParams};
use super::{WordLabel, WordModelError, CLASS_COUNT};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn save_model(model: &DecisionTreeModel) -> String {
    let params = model.params();
    let mut out = String::new();
    out.push_str("# smartglove word-gesture decision tree\n");
    let _ = writeln!(out, "version {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "max_depth {}", params.max_depth);
    let _ = writeln!(out, "min_leaf {}", params.min_leaf);
    let _ = writeln!(out, "nodes {}", model.nodes().len());
    write_subtree(model.nodes(), 0, &mut out);
    out.push_str("end\n");
    out
}

fn write_subtree(nodes: &[Node], i: usize, out: &mut String) {
    match &nodes[i] {
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "split {feature} {threshold:?}");
            write_subtree(nodes, *left, out);
            write_subtree(nodes, *right, out);
        }
        Node::Leaf { label, counts } => {
            let _ = write!(out, "leaf {label}");
            for c in counts {
                let _ = write!(out, " {c}");
            }
            out.push('\n');
        }
    }
}

fn malformed(why: impl Into<String>) -> WordModelError {
    WordModelError::MalformedModel(why.into())
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(n, l)| (n + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Lines { inner: it.peekable() }
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), WordModelError> {
        self.inner
            .next()
            .map(|(n, l)| (n, l.split_whitespace().collect()))
            .ok_or_else(|| malformed(format!("document ends before {what}")))
    }

    fn field(&mut self, key: &str) -> Result<&'a str, WordModelError> {
        let (n, parts) = self.next(key)?;
        match parts.as_slice() {
            [k, v] if *k == key => Ok(v),
            _ => Err(malformed(format!("line {n}: expected `{key} <value>`"))),
        }
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, WordModelError> {
    s.parse().map_err(|_| malformed(format!("bad {what} {s:?}")))
}

pub fn load_model(text: &str) -> Result<DecisionTreeModel, WordModelError> {
    let mut lines = Lines::new(text);
    let version = lines.field("version")?;
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(WordModelError::SchemaMismatch {
            found: version.to_string(),
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let params = TreeParams {
        max_depth: parse_num(lines.field("max_depth")?, "max_depth")?,
        min_leaf: parse_num(lines.field("min_leaf")?, "min_leaf")?,
    };
    let declared: usize = parse_num(lines.field("nodes")?, "node count")?;

    let mut nodes = Vec::with_capacity(declared.min(1 << 16));
    read_subtree(&mut lines, &mut nodes, declared, 0)?;
    if nodes.len() != declared {
        return Err(malformed(format!(
            "header declares {declared} nodes, found {}",
            nodes.len()
        )));
    }
    let (n, end) = lines.next("end marker")?;
    if end.as_slice() != ["end"] {
        return Err(malformed(format!("line {n}: expected `end`")));
    }
    if let Some((n, _)) = lines.inner.next() {
        return Err(malformed(format!("line {n}: content after `end`")));
    }
    DecisionTreeModel::from_nodes(nodes, params)
}

fn read_subtree(
    lines: &mut Lines<'_>,
    nodes: &mut Vec<Node>,
    limit: usize,
    depth: usize,
) -> Result<usize, WordModelError> {
    if nodes.len() >= limit {
        return Err(malformed("more nodes than declared"));
    }
    if depth > limit {
        return Err(malformed("tree deeper than its node count"));
    }
    let (n, parts) = lines.next("node")?;
    let me = nodes.len();
    match parts.as_slice() {
        ["split", feature, threshold] => {
            let feature = parse_num(feature, "feature index")?;
            let threshold: f64 = parse_num(threshold, "threshold")?;
            nodes.push(Node::Split {
                feature,
                threshold,
                left: me + 1,
                right: 0,
            });
            read_subtree(lines, nodes, limit, depth + 1)?;
            let right_at = read_subtree(lines, nodes, limit, depth + 1)?;
            if let Node::Split { right, .. } = &mut nodes[me] {
                *right = right_at;
            }
        }
        ["leaf", label, counts @ ..] if counts.len() == CLASS_COUNT => {
            let label: WordLabel = label
                .parse()
                .map_err(|_| malformed(format!("line {n}: unknown label {label:?}")))?;
            let mut parsed = [0u32; CLASS_COUNT];
            for (slot, c) in parsed.iter_mut().zip(counts) {
                *slot = parse_num(c, "class count")?;
            }
            nodes.push(Node::Leaf { label, counts: parsed });
        }
        _ => return Err(malformed(format!("line {n}: expected a split or leaf node"))),
    }
    Ok(me)
}
