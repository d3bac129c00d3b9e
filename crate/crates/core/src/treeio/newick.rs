//! Newick parsing.
//!
//! The parser is iterative, so nesting depth is bounded only by memory.
//! Labels are unquoted runs of characters other than whitespace and
//! `()[]':;,`, or single-quoted strings with `''` as an escaped quote.
//! Bracketed comments are skipped.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewickError {
    #[error("input is not valid UTF-8 (byte {position})")]
    InvalidUtf8 { position: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("unexpected {found:?} at byte {position}")]
    UnexpectedChar { found: char, position: usize },
    #[error("unclosed '(' : expected ')' at byte {position}")]
    UnclosedParen { position: usize },
    #[error("')' at byte {position} has no matching '('")]
    UnmatchedCloseParen { position: usize },
    #[error("unterminated quoted label starting at byte {position}")]
    UnclosedQuote { position: usize },
    #[error("unterminated comment starting at byte {position}")]
    UnclosedComment { position: usize },
    #[error("missing ';' at byte {position}")]
    MissingSemicolon { position: usize },
    #[error("invalid branch length {text:?} at byte {position}")]
    InvalidLength { text: String, position: usize },
    #[error("negative branch length {value} at byte {position}")]
    NegativeLength { value: f64, position: usize },
    #[error("unexpected input after ';' at byte {position}")]
    TrailingInput { position: usize },
    #[error("leaf without a name at byte {position}")]
    UnnamedLeaf { position: usize },
    #[error("leaf name {name:?} appears more than once")]
    DuplicateName { name: String },
    #[error("expected 3 leaves, found {found}")]
    LeafCount { found: usize },
    #[error("taxon {name:?} is not a leaf of the tree")]
    MissingTaxon { name: String },
}

pub type Result<T> = std::result::Result<T, NewickError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: Option<String>,
    pub length: Option<f64>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Byte offset where the node's text starts.
    pub position: usize,
}

/// A rooted tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct NewickTree {
    nodes: Vec<Node>,
}

impl NewickTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty())
    }

    pub fn find_leaf(&self, name: &str) -> Option<usize> {
        self.leaves().find(|&i| self.nodes[i].name.as_deref() == Some(name))
    }

    pub fn leaf_names(&self) -> Vec<&str> {
        self.leaves().filter_map(|i| self.nodes[i].name.as_deref()).collect()
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    offset: usize,
}

fn is_delimiter(b: u8) -> bool {
    b.is_ascii_whitespace() || matches!(b, b'(' | b')' | b'[' | b']' | b'\'' | b':' | b';' | b',')
}

impl<'a> Parser<'a> {
    fn at(&self) -> usize {
        self.offset + self.pos
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn unexpected(&self) -> NewickError {
        let found = self.text[self.pos..].chars().next().unwrap_or('\0');
        NewickError::UnexpectedChar {
            found,
            position: self.at(),
        }
    }

    fn skip_blank(&mut self) -> Result<()> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    let start = self.at();
                    match self.bytes[self.pos..].iter().position(|&b| b == b']') {
                        Some(end) => self.pos += end + 1,
                        None => return Err(NewickError::UnclosedComment { position: start }),
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_blank()?;
        if self.peek() == Some(b'\'') {
            let start = self.at();
            self.pos += 1;
            let mut out = String::new();
            loop {
                let rest = &self.text[self.pos..];
                match rest.find('\'') {
                    None => return Err(NewickError::UnclosedQuote { position: start }),
                    Some(q) => {
                        out.push_str(&rest[..q]);
                        self.pos += q + 1;
                        if self.peek() == Some(b'\'') {
                            out.push('\'');
                            self.pos += 1;
                        } else {
                            return Ok(Some(out));
                        }
                    }
                }
            }
        }
        let start = self.pos;
        while let Some(b) = self.peek() {
            if is_delimiter(b) {
                break;
            }
            self.pos += 1;
        }
        Ok((self.pos > start).then(|| self.text[start..self.pos].to_string()))
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_blank()?;
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_blank()?;
        let start = self.pos;
        while let Some(b) = self.peek() {
            if is_delimiter(b) {
                break;
            }
            self.pos += 1;
        }
        let text = &self.text[start..self.pos];
        let position = self.offset + start;
        let numeric = !text.is_empty()
            && text
                .bytes()
                .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
        match text.parse::<f64>() {
            Ok(v) if numeric && v.is_finite() => {
                if v < 0.0 {
                    Err(NewickError::NegativeLength { value: v, position })
                } else {
                    Ok(Some(v + 0.0))
                }
            }
            _ => Err(NewickError::InvalidLength {
                text: text.to_string(),
                position,
            }),
        }
    }
}

fn attach(nodes: &mut Vec<Node>, parent: Option<usize>, position: usize) -> usize {
    let id = nodes.len();
    nodes.push(Node {
        name: None,
        length: None,
        parent,
        children: Vec::new(),
        position,
    });
    if let Some(p) = parent {
        nodes[p].children.push(id);
    }
    id
}

/// Parses one tree from `text`, which must end at the tree's `;` up to
/// trailing whitespace. `offset` is added to every reported position.
pub fn parse_newick_at(text: &str, offset: usize) -> Result<NewickTree> {
    let mut p = Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
        offset,
    };
    p.skip_blank()?;
    if p.peek().is_none() {
        return Err(NewickError::EmptyInput);
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    'subtree: loop {
        p.skip_blank()?;
        let parent = open.last().copied();
        if p.peek() == Some(b'(') {
            let id = attach(&mut nodes, parent, p.at());
            open.push(id);
            p.pos += 1;
            continue 'subtree;
        }
        let id = attach(&mut nodes, parent, p.at());
        nodes[id].name = p.label()?;
        nodes[id].length = p.length()?;
        loop {
            p.skip_blank()?;
            match p.peek() {
                Some(b',') if !open.is_empty() => {
                    p.pos += 1;
                    continue 'subtree;
                }
                Some(b')') => {
                    let Some(closed) = open.pop() else {
                        return Err(NewickError::UnmatchedCloseParen { position: p.at() });
                    };
                    p.pos += 1;
                    nodes[closed].name = p.label()?;
                    nodes[closed].length = p.length()?;
                }
                Some(b';') => {
                    if !open.is_empty() {
                        return Err(NewickError::UnclosedParen { position: p.at() });
                    }
                    p.pos += 1;
                    p.skip_blank()?;
                    if p.peek().is_some() {
                        return Err(NewickError::TrailingInput { position: p.at() });
                    }
                    break 'subtree;
                }
                None if !open.is_empty() => return Err(NewickError::UnclosedParen { position: p.at() }),
                None => return Err(NewickError::MissingSemicolon { position: p.at() }),
                Some(_) => return Err(p.unexpected()),
            }
        }
    }
    let tree = NewickTree { nodes };
    let mut seen = std::collections::BTreeSet::new();
    for i in tree.leaves() {
        let node = &tree.nodes[i];
        match &node.name {
            None => return Err(NewickError::UnnamedLeaf { position: node.position }),
            Some(name) => {
                if !seen.insert(name.as_str()) {
                    return Err(NewickError::DuplicateName { name: name.clone() });
                }
            }
        }
    }
    Ok(tree)
}

/// Parses a single Newick tree from raw bytes.
pub fn parse_newick(input: &[u8]) -> Result<NewickTree> {
    let text = std::str::from_utf8(input).map_err(|e| NewickError::InvalidUtf8 {
        position: e.valid_up_to(),
    })?;
    parse_newick_at(text, 0)
}

/// Splits text into `;`-terminated records, ignoring `;` inside quotes and
/// comments. Returns `(offset, record)` pairs; a non-blank tail without `;`
/// is returned as a final record so that it is reported as an error.
pub fn split_records(text: &str) -> Vec<(usize, &str)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\'' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'\'' {
                    i += 1;
                }
            }
            b'[' => {
                while i < bytes.len() && bytes[i] != b']' {
                    i += 1;
                }
            }
            b';' => {
                out.push((start, &text[start..=i]));
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if !text[start..].trim().is_empty() {
        out.push((start, &text[start..]));
    }
    out
}
