//! Shared fixtures and an independent reader for the emitted C subset.
//!
//! The reader tokenizes and parses `int predict(float* x){ ... }` bodies made of
//! nested `if (x[i] <= t) { ... } else { ... }` blocks and `return k;`
//! statements, then evaluates the parsed syntax tree directly. It shares no
//! code with the transpiler.

#![allow(dead_code)]

use deltaml::learners::{DecisionTree, Model, ModelSnapshot, TreeNode};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Punct(&'static str),
    /// Text of a `//` comment, without the slashes.
    Comment(String),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            let start = i + 2;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            out.push(Tok::Comment(chars[start..i].iter().collect()));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() || c == '.' || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.')) {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Tok::Number(chars[start..i].iter().collect()));
        } else if c == '<' && chars.get(i + 1) == Some(&'=') {
            out.push(Tok::Punct("<="));
            i += 2;
        } else {
            let p = match c {
                '(' => "(",
                ')' => ")",
                '{' => "{",
                '}' => "}",
                '[' => "[",
                ']' => "]",
                '*' => "*",
                ';' => ";",
                '<' => "<",
                other => return Err(format!("unexpected character {other:?}")),
            };
            out.push(Tok::Punct(p));
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Lt,
}

/// Parsed statement. `tag` is the `node = k` annotation, if any.
#[derive(Debug, Clone, PartialEq)]
pub enum CStmt {
    If {
        feature: usize,
        cmp: Cmp,
        threshold: f64,
        then: Box<CStmt>,
        otherwise: Box<CStmt>,
        tag: Option<usize>,
    },
    Return {
        label: usize,
        tag: Option<usize>,
    },
}

impl CStmt {
    pub fn eval(&self, x: &[f64]) -> usize {
        match self {
            CStmt::Return { label, .. } => *label,
            CStmt::If {
                feature,
                cmp,
                threshold,
                then,
                otherwise,
                ..
            } => {
                let v = x[*feature];
                let taken = match cmp {
                    Cmp::Le => v <= *threshold,
                    Cmp::Lt => v < *threshold,
                };
                if taken {
                    then.eval(x)
                } else {
                    otherwise.eval(x)
                }
            }
        }
    }

    /// Tags in source order.
    pub fn tags(&self) -> Vec<Option<usize>> {
        let mut out = Vec::new();
        self.collect_tags(&mut out);
        out
    }

    fn collect_tags(&self, out: &mut Vec<Option<usize>>) {
        match self {
            CStmt::Return { tag, .. } => out.push(*tag),
            CStmt::If {
                tag, then, otherwise, ..
            } => {
                out.push(*tag);
                then.collect_tags(out);
                otherwise.collect_tags(out);
            }
        }
    }

    pub fn count_ifs(&self) -> usize {
        match self {
            CStmt::Return { .. } => 0,
            CStmt::If { then, otherwise, .. } => 1 + then.count_ifs() + otherwise.count_ifs(),
        }
    }

    pub fn count_returns(&self) -> usize {
        match self {
            CStmt::Return { .. } => 1,
            CStmt::If { then, otherwise, .. } => then.count_returns() + otherwise.count_returns(),
        }
    }
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok, String> {
        let t = self.toks.get(self.pos).cloned().ok_or("unexpected end of input")?;
        self.pos += 1;
        Ok(t)
    }

    fn punct(&mut self, p: &str) -> Result<(), String> {
        match self.next()? {
            Tok::Punct(q) if q == p => Ok(()),
            other => Err(format!("expected {p:?}, found {other:?}")),
        }
    }

    fn ident(&mut self, name: &str) -> Result<(), String> {
        match self.next()? {
            Tok::Ident(s) if s == name => Ok(()),
            other => Err(format!("expected {name:?}, found {other:?}")),
        }
    }

    fn integer(&mut self) -> Result<usize, String> {
        match self.next()? {
            Tok::Number(s) => s.parse().map_err(|_| format!("bad integer {s:?}")),
            other => Err(format!("expected integer, found {other:?}")),
        }
    }

    fn float(&mut self) -> Result<f64, String> {
        match self.next()? {
            Tok::Number(s) => s.parse().map_err(|_| format!("bad number {s:?}")),
            other => Err(format!("expected number, found {other:?}")),
        }
    }

    /// Consumes a trailing `//node = k` comment if one follows.
    fn tag(&mut self) -> Result<Option<usize>, String> {
        if let Some(Tok::Comment(text)) = self.peek() {
            let text = text.trim().to_string();
            self.pos += 1;
            let rest = text.strip_prefix("node").ok_or(format!("unexpected comment {text:?}"))?;
            let rest = rest.trim_start().strip_prefix('=').ok_or(format!("bad tag {text:?}"))?;
            return rest.trim().parse().map(Some).map_err(|_| format!("bad tag {text:?}"));
        }
        Ok(None)
    }

    fn skip_comments(&mut self) {
        while let Some(Tok::Comment(_)) = self.peek() {
            self.pos += 1;
        }
    }

    fn stmt(&mut self) -> Result<CStmt, String> {
        self.skip_comments();
        match self.next()? {
            Tok::Ident(kw) if kw == "return" => {
                let label = self.integer()?;
                self.punct(";")?;
                let tag = self.tag()?;
                Ok(CStmt::Return { label, tag })
            }
            Tok::Ident(kw) if kw == "if" => {
                self.punct("(")?;
                self.ident("x")?;
                self.punct("[")?;
                let feature = self.integer()?;
                self.punct("]")?;
                let cmp = match self.next()? {
                    Tok::Punct("<=") => Cmp::Le,
                    Tok::Punct("<") => Cmp::Lt,
                    other => return Err(format!("expected comparison, found {other:?}")),
                };
                let threshold = self.float()?;
                self.punct(")")?;
                self.punct("{")?;
                let tag = self.tag()?;
                let then = self.stmt()?;
                self.skip_comments();
                self.punct("}")?;
                self.ident("else")?;
                self.punct("{")?;
                let otherwise = self.stmt()?;
                self.skip_comments();
                self.punct("}")?;
                Ok(CStmt::If {
                    feature,
                    cmp,
                    threshold,
                    then: Box::new(then),
                    otherwise: Box::new(otherwise),
                    tag,
                })
            }
            other => Err(format!("expected statement, found {other:?}")),
        }
    }
}

/// Parses a complete `int predict(float* x){ ... }` definition.
pub fn parse_c(src: &str) -> Result<CStmt, String> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    p.ident("int")?;
    p.ident("predict")?;
    p.punct("(")?;
    p.ident("float")?;
    p.punct("*")?;
    p.ident("x")?;
    p.punct(")")?;
    p.punct("{")?;
    let body = p.stmt()?;
    p.skip_comments();
    p.punct("}")?;
    if p.pos != p.toks.len() {
        return Err(format!("trailing tokens after function: {:?}", &p.toks[p.pos..]));
    }
    Ok(body)
}

/// The two-feature, 13-node reference tree: leaf labels equal their preorder
/// node ids and the root splits `x[0]` at 3.88166737556.
pub fn reference_tree() -> ModelSnapshot {
    let split = |feature, threshold, left, right| TreeNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    let leaf = |label| TreeNode::Leaf { label };
    let nodes = vec![
        split(0, 3.88166737556, 1, 12),
        split(0, -0.185908049345, 2, 7),
        split(1, -1.66271317005, 3, 4),
        leaf(3),
        split(1, 0.975374698639, 5, 6),
        leaf(5),
        leaf(6),
        split(1, 0.637046217918, 8, 9),
        leaf(8),
        split(1, 4.3416762352, 10, 11),
        leaf(10),
        leaf(11),
        leaf(12),
    ];
    let tree = DecisionTree::from_nodes(nodes, 2).expect("reference tree is well formed");
    ModelSnapshot::new(Model::DecisionTree(tree), 0)
}
