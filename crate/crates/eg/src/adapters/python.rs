//! Reference adapter: a practical subset of Python.
//!
//! Covers the constructs that dominate real method bodies: assignments,
//! calls, attribute access and subscripts, `if`/`for`/`while`/`with`/`try`
//! blocks, `def`/`class` (nested definitions stay inside the parent tree),
//! literals, lambdas, and comprehensions. Full-language corpora can be fed
//! through the interchange format instead.
//!
//! Tree shapes follow the token order of the source exactly. Binary chains
//! at one precedence level stay flat (`a + b - c` is one node labeled
//! `#+#-#`), while call/attribute/subscript trailers nest to the left, so
//! `json.dump(data, f)` is a call node whose callee is the `#.#` node that
//! a query like `json.dump` parses to.

use super::{MethodSource, ParseError, ParserAdapter};
use crate::syntax::{Element, SimplifiedParseTree, Span, Token, TokenKind, TreeRef};

/// Python word keywords, including the fixed-value literals.
pub const WORD_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

/// Operator and punctuation tokens, longest first so the lexer can match
/// greedily.
pub const SYMBOLS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "!=", ">=", "<=", "==", "->", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "@=", "**", "//", ">>", "<<", ":=", "(", ")", "[", "]", "{", "}",
    ",", ":", ".", ";", "=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">",
];

/// The reference Python adapter. Stateless; cheap to share across threads.
#[derive(Debug, Default, Clone, Copy)]
pub struct PythonAdapter;

impl ParserAdapter for PythonAdapter {
    fn language(&self) -> &'static str {
        "python"
    }

    fn is_keyword(&self, text: &str) -> bool {
        WORD_KEYWORDS.contains(&text) || SYMBOLS.contains(&text)
    }

    fn line_comment_prefix(&self) -> &'static str {
        "#"
    }

    fn parse_method(&self, src: &MethodSource) -> Result<SimplifiedParseTree, ParseError> {
        let tokens = lex(&src.source)?;
        let mut parser = Parser::new(&src.source, &tokens);
        parser.parse_module()
    }

    fn parse_expression(&self, text: &str) -> Result<(SimplifiedParseTree, TreeRef), ParseError> {
        let tokens = lex(text)?;
        let mut parser = Parser::new(text, &tokens);
        parser.parse_single_expression()
    }

    fn extract_methods(&self, path: &str, file_source: &str) -> Vec<MethodSource> {
        extract_methods(path, file_source)
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LexKind {
    Name,
    Number,
    Str,
    Keyword,
    Symbol,
    Newline,
    Indent,
    Dedent,
    End,
}

#[derive(Debug, Clone)]
struct LexToken {
    kind: LexKind,
    text: String,
    span: Span,
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

fn lex(source: &str) -> Result<Vec<LexToken>, ParseError> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut indents: Vec<usize> = vec![0];
    let mut i = 0usize;
    let mut depth = 0usize;
    let mut at_line_start = true;
    let mut emitted_any = false;

    // Baseline indentation of the first non-blank line, so methods sliced
    // out of class bodies parse without dedenting the text.
    let mut base_indent: Option<usize> = None;

    while i < bytes.len() {
        if at_line_start && depth == 0 {
            let line_start = i;
            let mut width = 0usize;
            while i < bytes.len() {
                match bytes[i] {
                    b' ' => {
                        width += 1;
                        i += 1;
                    }
                    b'\t' => {
                        width = width / 8 * 8 + 8;
                        i += 1;
                    }
                    b'\x0c' => {
                        width = 0;
                        i += 1;
                    }
                    _ => break,
                }
            }
            if i >= bytes.len() {
                break;
            }
            if bytes[i] == b'\n' || bytes[i] == b'\r' || bytes[i] == b'#' {
                // Blank or comment-only line: no tokens, no indent change.
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                i = (i + 1).min(bytes.len());
                continue;
            }
            let base = *base_indent.get_or_insert(width);
            let width = width.saturating_sub(base);
            let current = *indents.last().unwrap();
            if width > current {
                indents.push(width);
                out.push(LexToken {
                    kind: LexKind::Indent,
                    text: String::new(),
                    span: Span::new(line_start, i),
                });
            } else if width < current {
                while *indents.last().unwrap() > width {
                    indents.pop();
                    out.push(LexToken {
                        kind: LexKind::Dedent,
                        text: String::new(),
                        span: Span::new(i, i),
                    });
                }
                if *indents.last().unwrap() != width {
                    return Err(ParseError::at(source, i, "unindent does not match any outer indentation level"));
                }
            }
            at_line_start = false;
        }

        if i >= bytes.len() {
            break;
        }
        let b = bytes[i];
        match b {
            b'\n' => {
                if depth > 0 {
                    i += 1;
                } else {
                    out.push(LexToken {
                        kind: LexKind::Newline,
                        text: String::new(),
                        span: Span::new(i, i + 1),
                    });
                    i += 1;
                    at_line_start = true;
                }
            }
            b'\r' | b' ' | b'\t' | b'\x0c' => {
                i += 1;
            }
            b'\\' if i + 1 < bytes.len() && (bytes[i + 1] == b'\n' || bytes[i + 1] == b'\r') => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                i = (i + 1).min(bytes.len());
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'\'' | b'"' => {
                let tok = scan_string(source, i, i)?;
                i = tok.span.end;
                out.push(tok);
                emitted_any = true;
            }
            b'0'..=b'9' => {
                let tok = scan_number(source, i)?;
                i = tok.span.end;
                out.push(tok);
                emitted_any = true;
            }
            b'.' if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() => {
                let tok = scan_number(source, i)?;
                i = tok.span.end;
                out.push(tok);
                emitted_any = true;
            }
            _ => {
                let c = source[i..].chars().next().unwrap();
                if is_ident_start(c) {
                    let start = i;
                    let mut end = i;
                    for (off, ch) in source[i..].char_indices() {
                        if is_ident_continue(ch) {
                            end = i + off + ch.len_utf8();
                        } else {
                            break;
                        }
                    }
                    let word = &source[start..end];
                    // A short run of string-prefix letters directly before a
                    // quote is part of the string literal.
                    if word.len() <= 2
                        && word.bytes().all(|b| matches!(b, b'r' | b'b' | b'u' | b'f' | b'R' | b'B' | b'U' | b'F'))
                        && end < bytes.len()
                        && (bytes[end] == b'\'' || bytes[end] == b'"')
                    {
                        let tok = scan_string(source, start, end)?;
                        i = tok.span.end;
                        out.push(tok);
                    } else {
                        let kind = if WORD_KEYWORDS.contains(&word) {
                            LexKind::Keyword
                        } else {
                            LexKind::Name
                        };
                        out.push(LexToken {
                            kind,
                            text: word.to_string(),
                            span: Span::new(start, end),
                        });
                        i = end;
                    }
                    emitted_any = true;
                } else {
                    let mut matched = false;
                    for sym in SYMBOLS {
                        if source[i..].starts_with(sym) {
                            match *sym {
                                "(" | "[" | "{" => depth += 1,
                                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                                _ => {}
                            }
                            out.push(LexToken {
                                kind: LexKind::Symbol,
                                text: (*sym).to_string(),
                                span: Span::new(i, i + sym.len()),
                            });
                            i += sym.len();
                            matched = true;
                            emitted_any = true;
                            break;
                        }
                    }
                    if !matched {
                        return Err(ParseError::at(source, i, format!("unexpected character {:?}", c)));
                    }
                }
            }
        }
    }

    if !at_line_start && emitted_any {
        out.push(LexToken {
            kind: LexKind::Newline,
            text: String::new(),
            span: Span::new(source.len(), source.len()),
        });
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(LexToken {
            kind: LexKind::Dedent,
            text: String::new(),
            span: Span::new(source.len(), source.len()),
        });
    }
    out.push(LexToken {
        kind: LexKind::End,
        text: String::new(),
        span: Span::new(source.len(), source.len()),
    });
    Ok(out)
}

fn scan_string(source: &str, start: usize, quote_at: usize) -> Result<LexToken, ParseError> {
    let bytes = source.as_bytes();
    let quote = bytes[quote_at];
    let triple = quote_at + 2 < bytes.len()
        && bytes[quote_at + 1] == quote
        && bytes[quote_at + 2] == quote;
    let mut i = quote_at + if triple { 3 } else { 1 };
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\\' {
            i += 2;
            continue;
        }
        if triple {
            if b == quote && i + 2 < bytes.len() && bytes[i + 1] == quote && bytes[i + 2] == quote {
                let end = i + 3;
                return Ok(LexToken {
                    kind: LexKind::Str,
                    text: source[start..end].to_string(),
                    span: Span::new(start, end),
                });
            }
            i += 1;
        } else {
            if b == quote {
                let end = i + 1;
                return Ok(LexToken {
                    kind: LexKind::Str,
                    text: source[start..end].to_string(),
                    span: Span::new(start, end),
                });
            }
            if b == b'\n' {
                return Err(ParseError::at(source, quote_at, "unterminated string literal"));
            }
            i += 1;
        }
    }
    Err(ParseError::at(source, quote_at, "unterminated string literal"))
}

fn scan_number(source: &str, start: usize) -> Result<LexToken, ParseError> {
    let bytes = source.as_bytes();
    let mut i = start;
    if bytes[i] == b'0' && i + 1 < bytes.len() && matches!(bytes[i + 1], b'x' | b'X' | b'o' | b'O' | b'b' | b'B') {
        i += 2;
        while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
            i += 1;
        }
    } else {
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                i += 1;
            }
        }
        if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
            let mut j = i + 1;
            if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                i = j;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                    i += 1;
                }
            }
        }
        if i < bytes.len() && matches!(bytes[i], b'j' | b'J') {
            i += 1;
        }
    }
    Ok(LexToken {
        kind: LexKind::Number,
        text: source[start..i].to_string(),
        span: Span::new(start, i),
    })
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// A parsed production: either a bare token or a finished node. Productions
/// that reduce to a single token or child collapse instead of wrapping, so
/// no node is ever a list holding one subtree.
#[derive(Debug, Clone, Copy)]
enum Item {
    Leaf(usize),
    Node(usize),
}

struct Parser<'a> {
    source: &'a str,
    toks: &'a [LexToken],
    pos: usize,
    nodes: Vec<(Vec<Element>, Span)>,
    leaves: Vec<Token>,
}

impl<'a> Parser<'a> {
    fn new(source: &'a str, toks: &'a [LexToken]) -> Self {
        Parser {
            source,
            toks,
            pos: 0,
            nodes: Vec::new(),
            leaves: Vec::new(),
        }
    }

    // -- token plumbing ----------------------------------------------------

    fn peek(&self) -> &LexToken {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek2(&self) -> Option<&LexToken> {
        self.toks.get(self.pos + 1)
    }

    fn at(&self, kind: LexKind) -> bool {
        self.peek().kind == kind
    }

    fn at_text(&self, kind: LexKind, text: &str) -> bool {
        let t = self.peek();
        t.kind == kind && t.text == text
    }

    fn at_kw(&self, text: &str) -> bool {
        self.at_text(LexKind::Keyword, text)
    }

    fn at_sym(&self, text: &str) -> bool {
        self.at_text(LexKind::Symbol, text)
    }

    fn bump(&mut self) -> &'a LexToken {
        let t = &self.toks[self.pos];
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::at(self.source, self.peek().span.start, message)
    }

    fn expect_kw(&mut self, text: &str) -> Result<Element, ParseError> {
        if !self.at_kw(text) {
            return Err(self.error(format!("expected {:?}, found {:?}", text, self.peek().text)));
        }
        let t = self.bump();
        Ok(Element::Keyword { text: t.text.clone(), span: t.span })
    }

    fn expect_sym(&mut self, text: &str) -> Result<Element, ParseError> {
        if !self.at_sym(text) {
            return Err(self.error(format!("expected {:?}, found {:?}", text, self.peek().text)));
        }
        let t = self.bump();
        Ok(Element::Keyword { text: t.text.clone(), span: t.span })
    }

    fn eat_newline(&mut self) -> Result<(), ParseError> {
        if self.at(LexKind::Newline) {
            self.bump();
            Ok(())
        } else if self.at(LexKind::End) {
            Ok(())
        } else {
            Err(self.error(format!("expected end of line, found {:?}", self.peek().text)))
        }
    }

    // -- tree plumbing -----------------------------------------------------

    fn keyword_elem(&mut self) -> Element {
        let t = self.bump();
        Element::Keyword { text: t.text.clone(), span: t.span }
    }

    fn leaf_item(&mut self) -> Item {
        let t = self.bump();
        self.leaves.push(Token {
            kind: TokenKind::NonKeyword,
            text: t.text.clone(),
            span: t.span,
        });
        Item::Leaf(self.leaves.len() - 1)
    }

    fn item_elem(&mut self, item: Item) -> Element {
        match item {
            Item::Leaf(i) => Element::Leaf(self.leaves[i].clone()),
            Item::Node(n) => Element::Child(n),
        }
    }

    fn elem_span(&self, el: &Element) -> Span {
        match el {
            Element::Keyword { span, .. } => *span,
            Element::Leaf(tok) => tok.span,
            Element::Child(n) => self.nodes[*n].1,
        }
    }

    fn push_node(&mut self, elements: Vec<Element>) -> Item {
        debug_assert!(!elements.is_empty());
        let mut span = self.elem_span(&elements[0]);
        for el in &elements[1..] {
            let s = self.elem_span(el);
            span = Span::new(span.start.min(s.start), span.end.max(s.end));
        }
        self.nodes.push((elements, span));
        Item::Node(self.nodes.len() - 1)
    }

    /// Collapses a one-element production to the element itself; keyword-only
    /// singletons still become nodes since a bare keyword is not an item.
    fn finish(&mut self, elements: Vec<Element>) -> Item {
        if elements.len() == 1 {
            match &elements[0] {
                Element::Child(n) => return Item::Node(*n),
                Element::Leaf(tok) => {
                    self.leaves.push(tok.clone());
                    return Item::Leaf(self.leaves.len() - 1);
                }
                Element::Keyword { .. } => {}
            }
        }
        self.push_node(elements)
    }

    fn build_tree(mut self, root_item: Item) -> SimplifiedParseTree {
        let root = match root_item {
            Item::Node(n) => n,
            Item::Leaf(i) => {
                let tok = self.leaves[i].clone();
                let span = tok.span;
                self.nodes.push((vec![Element::Leaf(tok)], span));
                self.nodes.len() - 1
            }
        };
        SimplifiedParseTree::from_parts(self.nodes, root, self.source.to_string())
    }

    // -- entry points --------------------------------------------------------

    fn parse_module(&mut self) -> Result<SimplifiedParseTree, ParseError> {
        let mut stmts = Vec::new();
        while !self.at(LexKind::End) {
            if self.at(LexKind::Newline) {
                self.bump();
                continue;
            }
            let item = self.statement()?;
            stmts.push(self.item_elem(item));
        }
        if stmts.is_empty() {
            return Err(self.error("empty source"));
        }
        let item = self.finish(stmts);
        let mut done = Parser::new("", &[]);
        std::mem::swap(&mut done.nodes, &mut self.nodes);
        std::mem::swap(&mut done.leaves, &mut self.leaves);
        done.source = self.source;
        Ok(done.build_tree(item))
    }

    fn parse_single_expression(&mut self) -> Result<(SimplifiedParseTree, TreeRef), ParseError> {
        while self.at(LexKind::Newline) {
            self.bump();
        }
        let item = self.ternary()?;
        while self.at(LexKind::Newline) {
            self.bump();
        }
        if !self.at(LexKind::End) {
            return Err(self.error(format!("trailing input after expression: {:?}", self.peek().text)));
        }
        let mut done = Parser::new("", &[]);
        std::mem::swap(&mut done.nodes, &mut self.nodes);
        std::mem::swap(&mut done.leaves, &mut self.leaves);
        done.source = self.source;
        let tree = done.build_tree(item);
        let root = tree.root();
        let at = match item {
            Item::Node(_) => TreeRef::Node(root),
            Item::Leaf(_) => TreeRef::Leaf { node: root, elem: 0 },
        };
        Ok((tree, at))
    }

    // -- statements ----------------------------------------------------------

    fn statement(&mut self) -> Result<Item, ParseError> {
        if self.at_sym("@") {
            return self.decorated();
        }
        if self.at_kw("async") {
            return self.compound_statement(true);
        }
        if self.at(LexKind::Keyword) {
            match self.peek().text.as_str() {
                "if" | "while" | "for" | "try" | "with" | "def" | "class" => {
                    return self.compound_statement(false)
                }
                _ => {}
            }
        }
        self.simple_statement_line()
    }

    fn decorated(&mut self) -> Result<Item, ParseError> {
        let mut parts = Vec::new();
        while self.at_sym("@") {
            let at = self.keyword_elem();
            let expr = self.ternary()?;
            let elem = self.item_elem(expr);
            let dec = self.push_node(vec![at, elem]);
            parts.push(self.item_elem(dec));
            self.eat_newline()?;
            while self.at(LexKind::Newline) {
                self.bump();
            }
        }
        let target = if self.at_kw("async") {
            self.compound_statement(true)?
        } else if self.at_kw("def") || self.at_kw("class") {
            self.compound_statement(false)?
        } else {
            return Err(self.error("expected def or class after decorator"));
        };
        parts.push(self.item_elem(target));
        Ok(self.push_node(parts))
    }

    fn compound_statement(&mut self, is_async: bool) -> Result<Item, ParseError> {
        let mut prefix = Vec::new();
        if is_async {
            prefix.push(self.expect_kw("async")?);
        }
        match self.peek().text.as_str() {
            "if" => self.if_statement(prefix),
            "while" => self.while_statement(prefix),
            "for" => self.for_statement(prefix),
            "try" => self.try_statement(prefix),
            "with" => self.with_statement(prefix),
            "def" => self.def_statement(prefix),
            "class" => self.class_statement(prefix),
            other => Err(self.error(format!("unexpected keyword {:?}", other))),
        }
    }

    fn if_statement(&mut self, mut els: Vec<Element>) -> Result<Item, ParseError> {
        els.push(self.expect_kw("if")?);
        let cond = self.ternary()?;
        els.push(self.item_elem(cond));
        els.push(self.expect_sym(":")?);
        let body = self.suite()?;
        els.push(self.item_elem(body));
        while self.at_kw("elif") {
            els.push(self.expect_kw("elif")?);
            let cond = self.ternary()?;
            els.push(self.item_elem(cond));
            els.push(self.expect_sym(":")?);
            let body = self.suite()?;
            els.push(self.item_elem(body));
        }
        if self.at_kw("else") {
            els.push(self.expect_kw("else")?);
            els.push(self.expect_sym(":")?);
            let body = self.suite()?;
            els.push(self.item_elem(body));
        }
        Ok(self.push_node(els))
    }

    fn while_statement(&mut self, mut els: Vec<Element>) -> Result<Item, ParseError> {
        els.push(self.expect_kw("while")?);
        let cond = self.ternary()?;
        els.push(self.item_elem(cond));
        els.push(self.expect_sym(":")?);
        let body = self.suite()?;
        els.push(self.item_elem(body));
        if self.at_kw("else") {
            els.push(self.expect_kw("else")?);
            els.push(self.expect_sym(":")?);
            let body = self.suite()?;
            els.push(self.item_elem(body));
        }
        Ok(self.push_node(els))
    }

    fn for_statement(&mut self, mut els: Vec<Element>) -> Result<Item, ParseError> {
        els.push(self.expect_kw("for")?);
        // Loop targets sit below the comparison level, else `in` would be
        // consumed as a comparison operator.
        let targets = self.expr_list(Self::bit_or)?;
        els.push(self.item_elem(targets));
        els.push(self.expect_kw("in")?);
        let iter = self.expr_list(Self::ternary)?;
        els.push(self.item_elem(iter));
        els.push(self.expect_sym(":")?);
        let body = self.suite()?;
        els.push(self.item_elem(body));
        if self.at_kw("else") {
            els.push(self.expect_kw("else")?);
            els.push(self.expect_sym(":")?);
            let body = self.suite()?;
            els.push(self.item_elem(body));
        }
        Ok(self.push_node(els))
    }

    fn try_statement(&mut self, mut els: Vec<Element>) -> Result<Item, ParseError> {
        els.push(self.expect_kw("try")?);
        els.push(self.expect_sym(":")?);
        let body = self.suite()?;
        els.push(self.item_elem(body));
        let mut any_handler = false;
        while self.at_kw("except") {
            any_handler = true;
            els.push(self.expect_kw("except")?);
            if !self.at_sym(":") {
                let exc = self.ternary()?;
                if self.at_kw("as") {
                    let exc_el = self.item_elem(exc);
                    let as_kw = self.expect_kw("as")?;
                    if !self.at(LexKind::Name) {
                        return Err(self.error("expected a name after as"));
                    }
                    let name = self.leaf_item();
                    let name_el = self.item_elem(name);
                    let bound = self.push_node(vec![exc_el, as_kw, name_el]);
                    els.push(self.item_elem(bound));
                } else {
                    els.push(self.item_elem(exc));
                }
            }
            els.push(self.expect_sym(":")?);
            let handler = self.suite()?;
            els.push(self.item_elem(handler));
        }
        if self.at_kw("else") {
            els.push(self.expect_kw("else")?);
            els.push(self.expect_sym(":")?);
            let body = self.suite()?;
            els.push(self.item_elem(body));
        }
        if self.at_kw("finally") {
            any_handler = true;
            els.push(self.expect_kw("finally")?);
            els.push(self.expect_sym(":")?);
            let body = self.suite()?;
            els.push(self.item_elem(body));
        }
        if !any_handler {
            return Err(self.error("try statement must have except or finally"));
        }
        Ok(self.push_node(els))
    }

    fn with_statement(&mut self, mut els: Vec<Element>) -> Result<Item, ParseError> {
        els.push(self.expect_kw("with")?);
        let mut items = Vec::new();
        loop {
            let expr = self.ternary()?;
            let item = if self.at_kw("as") {
                let expr_el = self.item_elem(expr);
                let as_kw = self.expect_kw("as")?;
                let target = self.atom_trailered()?;
                let target_el = self.item_elem(target);
                self.push_node(vec![expr_el, as_kw, target_el])
            } else {
                expr
            };
            items.push(self.item_elem(item));
            if self.at_sym(",") {
                items.push(self.keyword_elem());
            } else {
                break;
            }
        }
        let items = self.finish(items);
        els.push(self.item_elem(items));
        els.push(self.expect_sym(":")?);
        let body = self.suite()?;
        els.push(self.item_elem(body));
        Ok(self.push_node(els))
    }

    fn def_statement(&mut self, mut els: Vec<Element>) -> Result<Item, ParseError> {
        els.push(self.expect_kw("def")?);
        if !self.at(LexKind::Name) {
            return Err(self.error("expected function name"));
        }
        let name = self.leaf_item();
        els.push(self.item_elem(name));
        els.push(self.expect_sym("(")?);
        if !self.at_sym(")") {
            let params = self.param_list()?;
            els.push(self.item_elem(params));
        }
        els.push(self.expect_sym(")")?);
        if self.at_sym("->") {
            els.push(self.keyword_elem());
            let anno = self.ternary()?;
            els.push(self.item_elem(anno));
        }
        els.push(self.expect_sym(":")?);
        let body = self.suite()?;
        els.push(self.item_elem(body));
        Ok(self.push_node(els))
    }

    fn class_statement(&mut self, mut els: Vec<Element>) -> Result<Item, ParseError> {
        els.push(self.expect_kw("class")?);
        if !self.at(LexKind::Name) {
            return Err(self.error("expected class name"));
        }
        let name = self.leaf_item();
        els.push(self.item_elem(name));
        if self.at_sym("(") {
            els.push(self.keyword_elem());
            if !self.at_sym(")") {
                let bases = self.arg_list()?;
                els.push(self.item_elem(bases));
            }
            els.push(self.expect_sym(")")?);
        }
        els.push(self.expect_sym(":")?);
        let body = self.suite()?;
        els.push(self.item_elem(body));
        Ok(self.push_node(els))
    }

    fn param_list(&mut self) -> Result<Item, ParseError> {
        let mut els = Vec::new();
        loop {
            let param = self.param()?;
            els.push(self.item_elem(param));
            if self.at_sym(",") {
                els.push(self.keyword_elem());
                if self.at_sym(")") {
                    break;
                }
            } else {
                break;
            }
        }
        Ok(self.finish(els))
    }

    fn param(&mut self) -> Result<Item, ParseError> {
        if self.at_sym("*") || self.at_sym("**") {
            let star = self.keyword_elem();
            if self.at(LexKind::Name) {
                let name = self.leaf_item();
                let name_el = self.item_elem(name);
                return Ok(self.push_node(vec![star, name_el]));
            }
            return Ok(self.push_node(vec![star]));
        }
        if self.at_sym("/") {
            let slash = self.keyword_elem();
            return Ok(self.push_node(vec![slash]));
        }
        if !self.at(LexKind::Name) {
            return Err(self.error("expected parameter name"));
        }
        let mut els = Vec::new();
        let name = self.leaf_item();
        els.push(self.item_elem(name));
        if self.at_sym(":") {
            els.push(self.keyword_elem());
            let anno = self.ternary()?;
            els.push(self.item_elem(anno));
        }
        if self.at_sym("=") {
            els.push(self.keyword_elem());
            let default = self.ternary()?;
            els.push(self.item_elem(default));
        }
        Ok(self.finish(els))
    }

    fn suite(&mut self) -> Result<Item, ParseError> {
        if self.at(LexKind::Newline) {
            self.bump();
            while self.at(LexKind::Newline) {
                self.bump();
            }
            if !self.at(LexKind::Indent) {
                return Err(self.error("expected an indented block"));
            }
            self.bump();
            let mut stmts = Vec::new();
            while !self.at(LexKind::Dedent) && !self.at(LexKind::End) {
                if self.at(LexKind::Newline) {
                    self.bump();
                    continue;
                }
                let stmt = self.statement()?;
                stmts.push(self.item_elem(stmt));
            }
            if self.at(LexKind::Dedent) {
                self.bump();
            }
            if stmts.is_empty() {
                return Err(self.error("empty block"));
            }
            Ok(self.finish(stmts))
        } else {
            self.simple_statement_line()
        }
    }

    fn simple_statement_line(&mut self) -> Result<Item, ParseError> {
        let mut els = Vec::new();
        loop {
            let stmt = self.small_statement()?;
            els.push(self.item_elem(stmt));
            if self.at_sym(";") {
                els.push(self.keyword_elem());
                if self.at(LexKind::Newline) || self.at(LexKind::End) {
                    break;
                }
            } else {
                break;
            }
        }
        self.eat_newline()?;
        Ok(self.finish(els))
    }

    fn small_statement(&mut self) -> Result<Item, ParseError> {
        if self.at(LexKind::Keyword) {
            match self.peek().text.as_str() {
                "pass" | "break" | "continue" => {
                    let kw = self.keyword_elem();
                    return Ok(self.push_node(vec![kw]));
                }
                "return" => {
                    let kw = self.keyword_elem();
                    if self.at(LexKind::Newline) || self.at(LexKind::End) || self.at_sym(";") {
                        return Ok(self.push_node(vec![kw]));
                    }
                    let value = self.expr_list(Self::ternary)?;
                    let value_el = self.item_elem(value);
                    return Ok(self.push_node(vec![kw, value_el]));
                }
                "raise" => {
                    let kw = self.keyword_elem();
                    if self.at(LexKind::Newline) || self.at(LexKind::End) || self.at_sym(";") {
                        return Ok(self.push_node(vec![kw]));
                    }
                    let mut els = vec![kw];
                    let exc = self.ternary()?;
                    els.push(self.item_elem(exc));
                    if self.at_kw("from") {
                        els.push(self.expect_kw("from")?);
                        let cause = self.ternary()?;
                        els.push(self.item_elem(cause));
                    }
                    return Ok(self.push_node(els));
                }
                "del" => {
                    let kw = self.keyword_elem();
                    let targets = self.expr_list(Self::atom_trailered)?;
                    let el = self.item_elem(targets);
                    return Ok(self.push_node(vec![kw, el]));
                }
                "assert" => {
                    let kw = self.keyword_elem();
                    let mut els = vec![kw];
                    let cond = self.ternary()?;
                    els.push(self.item_elem(cond));
                    if self.at_sym(",") {
                        els.push(self.keyword_elem());
                        let msg = self.ternary()?;
                        els.push(self.item_elem(msg));
                    }
                    return Ok(self.push_node(els));
                }
                "global" | "nonlocal" => {
                    let kw = self.keyword_elem();
                    let mut els = vec![kw];
                    loop {
                        if !self.at(LexKind::Name) {
                            return Err(self.error("expected a name"));
                        }
                        let name = self.leaf_item();
                        els.push(self.item_elem(name));
                        if self.at_sym(",") {
                            els.push(self.keyword_elem());
                        } else {
                            break;
                        }
                    }
                    return Ok(self.push_node(els));
                }
                "import" => return self.import_statement(),
                "from" => return self.import_from_statement(),
                "yield" => {
                    let y = self.yield_expr()?;
                    return Ok(y);
                }
                _ => {}
            }
        }
        self.expr_statement()
    }

    fn import_statement(&mut self) -> Result<Item, ParseError> {
        let kw = self.expect_kw("import")?;
        let mut els = vec![kw];
        loop {
            let item = self.dotted_as_name()?;
            els.push(self.item_elem(item));
            if self.at_sym(",") {
                els.push(self.keyword_elem());
            } else {
                break;
            }
        }
        Ok(self.push_node(els))
    }

    fn import_from_statement(&mut self) -> Result<Item, ParseError> {
        let mut els = vec![self.expect_kw("from")?];
        while self.at_sym(".") || self.at_sym("...") {
            els.push(self.keyword_elem());
        }
        if self.at(LexKind::Name) {
            let module = self.dotted_name()?;
            els.push(self.item_elem(module));
        }
        els.push(self.expect_kw("import")?);
        if self.at_sym("*") {
            els.push(self.keyword_elem());
            return Ok(self.push_node(els));
        }
        let parenthesized = self.at_sym("(");
        if parenthesized {
            els.push(self.keyword_elem());
        }
        let mut names = Vec::new();
        loop {
            let item = self.name_as_name()?;
            names.push(self.item_elem(item));
            if self.at_sym(",") {
                names.push(self.keyword_elem());
                if parenthesized && self.at_sym(")") {
                    break;
                }
            } else {
                break;
            }
        }
        let names = self.finish(names);
        els.push(self.item_elem(names));
        if parenthesized {
            els.push(self.expect_sym(")")?);
        }
        Ok(self.push_node(els))
    }

    fn dotted_as_name(&mut self) -> Result<Item, ParseError> {
        let name = self.dotted_name()?;
        if self.at_kw("as") {
            let name_el = self.item_elem(name);
            let as_kw = self.expect_kw("as")?;
            if !self.at(LexKind::Name) {
                return Err(self.error("expected a name after as"));
            }
            let alias = self.leaf_item();
            let alias_el = self.item_elem(alias);
            return Ok(self.push_node(vec![name_el, as_kw, alias_el]));
        }
        Ok(name)
    }

    fn name_as_name(&mut self) -> Result<Item, ParseError> {
        if !self.at(LexKind::Name) {
            return Err(self.error("expected a name"));
        }
        let name = self.leaf_item();
        if self.at_kw("as") {
            let name_el = self.item_elem(name);
            let as_kw = self.expect_kw("as")?;
            if !self.at(LexKind::Name) {
                return Err(self.error("expected a name after as"));
            }
            let alias = self.leaf_item();
            let alias_el = self.item_elem(alias);
            return Ok(self.push_node(vec![name_el, as_kw, alias_el]));
        }
        Ok(name)
    }

    fn dotted_name(&mut self) -> Result<Item, ParseError> {
        if !self.at(LexKind::Name) {
            return Err(self.error("expected a name"));
        }
        let mut cur = self.leaf_item();
        while self.at_sym(".") && matches!(self.peek2().map(|t| t.kind), Some(LexKind::Name)) {
            let cur_el = self.item_elem(cur);
            let dot = self.keyword_elem();
            let name = self.leaf_item();
            let name_el = self.item_elem(name);
            cur = self.push_node(vec![cur_el, dot, name_el]);
        }
        Ok(cur)
    }

    fn expr_statement(&mut self) -> Result<Item, ParseError> {
        let first = self.expr_list_or_star(Self::ternary)?;
        if self.at_sym(":") {
            // Annotated assignment: target ':' annotation ['=' value].
            let mut els = vec![self.item_elem(first)];
            els.push(self.keyword_elem());
            let anno = self.ternary()?;
            els.push(self.item_elem(anno));
            if self.at_sym("=") {
                els.push(self.keyword_elem());
                let value = self.expr_list_or_star(Self::ternary)?;
                els.push(self.item_elem(value));
            }
            return Ok(self.push_node(els));
        }
        if self.at_sym("=") {
            let mut els = vec![self.item_elem(first)];
            while self.at_sym("=") {
                els.push(self.keyword_elem());
                let value = if self.at_kw("yield") {
                    self.yield_expr()?
                } else {
                    self.expr_list_or_star(Self::ternary)?
                };
                els.push(self.item_elem(value));
            }
            return Ok(self.push_node(els));
        }
        const AUG_OPS: &[&str] = &[
            "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@=",
        ];
        if self.at(LexKind::Symbol) && AUG_OPS.contains(&self.peek().text.as_str()) {
            let mut els = vec![self.item_elem(first)];
            els.push(self.keyword_elem());
            let value = if self.at_kw("yield") {
                self.yield_expr()?
            } else {
                self.expr_list_or_star(Self::ternary)?
            };
            els.push(self.item_elem(value));
            return Ok(self.push_node(els));
        }
        Ok(first)
    }

    fn yield_expr(&mut self) -> Result<Item, ParseError> {
        let kw = self.expect_kw("yield")?;
        let mut els = vec![kw];
        if self.at_kw("from") {
            els.push(self.expect_kw("from")?);
            let value = self.ternary()?;
            els.push(self.item_elem(value));
        } else if !(self.at(LexKind::Newline)
            || self.at(LexKind::End)
            || self.at_sym(")")
            || self.at_sym("]")
            || self.at_sym("}")
            || self.at_sym(";"))
        {
            let value = self.expr_list(Self::ternary)?;
            els.push(self.item_elem(value));
        }
        Ok(self.push_node(els))
    }

    // -- expressions ---------------------------------------------------------

    /// `sub (',' sub)* [',']` — flat comma node, collapsed when singular.
    fn expr_list(
        &mut self,
        sub: fn(&mut Self) -> Result<Item, ParseError>,
    ) -> Result<Item, ParseError> {
        let mut els = Vec::new();
        let first = sub(self)?;
        els.push(self.item_elem(first));
        while self.at_sym(",") {
            els.push(self.keyword_elem());
            if self.list_end() {
                break;
            }
            let next = sub(self)?;
            els.push(self.item_elem(next));
        }
        Ok(self.finish(els))
    }

    /// Like [`expr_list`](Self::expr_list) but allows `*x` items.
    fn expr_list_or_star(
        &mut self,
        sub: fn(&mut Self) -> Result<Item, ParseError>,
    ) -> Result<Item, ParseError> {
        let mut els = Vec::new();
        let first = self.star_or(sub)?;
        els.push(self.item_elem(first));
        while self.at_sym(",") {
            els.push(self.keyword_elem());
            if self.list_end() {
                break;
            }
            let next = self.star_or(sub)?;
            els.push(self.item_elem(next));
        }
        Ok(self.finish(els))
    }

    fn star_or(
        &mut self,
        sub: fn(&mut Self) -> Result<Item, ParseError>,
    ) -> Result<Item, ParseError> {
        if self.at_sym("*") {
            let star = self.keyword_elem();
            let value = sub(self)?;
            let el = self.item_elem(value);
            return Ok(self.push_node(vec![star, el]));
        }
        sub(self)
    }

    fn list_end(&self) -> bool {
        self.at(LexKind::Newline)
            || self.at(LexKind::End)
            || self.at_sym(")")
            || self.at_sym("]")
            || self.at_sym("}")
            || self.at_sym("=")
            || self.at_sym(":")
            || self.at_sym(";")
    }

    fn ternary(&mut self) -> Result<Item, ParseError> {
        if self.at_kw("lambda") {
            return self.lambda();
        }
        let value = self.or_test()?;
        if self.at_kw("if") {
            let value_el = self.item_elem(value);
            let if_kw = self.expect_kw("if")?;
            let cond = self.or_test()?;
            let cond_el = self.item_elem(cond);
            let else_kw = self.expect_kw("else")?;
            let alt = self.ternary()?;
            let alt_el = self.item_elem(alt);
            return Ok(self.push_node(vec![value_el, if_kw, cond_el, else_kw, alt_el]));
        }
        Ok(value)
    }

    fn lambda(&mut self) -> Result<Item, ParseError> {
        let kw = self.expect_kw("lambda")?;
        let mut els = vec![kw];
        if !self.at_sym(":") {
            let params = self.param_list()?;
            els.push(self.item_elem(params));
        }
        els.push(self.expect_sym(":")?);
        let body = self.ternary()?;
        els.push(self.item_elem(body));
        Ok(self.push_node(els))
    }

    /// Flat chain at one precedence level: `a or b or c` is a single node.
    fn binary_chain(
        &mut self,
        sub: fn(&mut Self) -> Result<Item, ParseError>,
        is_op: fn(&Self) -> bool,
    ) -> Result<Item, ParseError> {
        let first = sub(self)?;
        if !is_op(self) {
            return Ok(first);
        }
        let mut els = vec![self.item_elem(first)];
        while is_op(self) {
            els.push(self.keyword_elem());
            let next = sub(self)?;
            els.push(self.item_elem(next));
        }
        Ok(self.push_node(els))
    }

    fn or_test(&mut self) -> Result<Item, ParseError> {
        self.binary_chain(Self::and_test, |p| p.at_kw("or"))
    }

    fn and_test(&mut self) -> Result<Item, ParseError> {
        self.binary_chain(Self::not_test, |p| p.at_kw("and"))
    }

    fn not_test(&mut self) -> Result<Item, ParseError> {
        if self.at_kw("not") {
            let kw = self.keyword_elem();
            let operand = self.not_test()?;
            let el = self.item_elem(operand);
            return Ok(self.push_node(vec![kw, el]));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Item, ParseError> {
        let first = self.bit_or()?;
        if !self.at_comp_op() {
            return Ok(first);
        }
        let mut els = vec![self.item_elem(first)];
        while self.at_comp_op() {
            if self.at_kw("not") {
                els.push(self.keyword_elem());
                els.push(self.expect_kw("in")?);
            } else if self.at_kw("is") {
                els.push(self.keyword_elem());
                if self.at_kw("not") {
                    els.push(self.keyword_elem());
                }
            } else {
                els.push(self.keyword_elem());
            }
            let next = self.bit_or()?;
            els.push(self.item_elem(next));
        }
        Ok(self.push_node(els))
    }

    fn at_comp_op(&self) -> bool {
        if self.at(LexKind::Symbol) {
            matches!(self.peek().text.as_str(), "<" | ">" | "==" | ">=" | "<=" | "!=")
        } else {
            self.at_kw("in")
                || self.at_kw("is")
                || (self.at_kw("not") && self.peek2().map(|t| t.text == "in").unwrap_or(false))
        }
    }

    fn bit_or(&mut self) -> Result<Item, ParseError> {
        self.binary_chain(Self::bit_xor, |p| p.at_sym("|"))
    }

    fn bit_xor(&mut self) -> Result<Item, ParseError> {
        self.binary_chain(Self::bit_and, |p| p.at_sym("^"))
    }

    fn bit_and(&mut self) -> Result<Item, ParseError> {
        self.binary_chain(Self::shift, |p| p.at_sym("&"))
    }

    fn shift(&mut self) -> Result<Item, ParseError> {
        self.binary_chain(Self::arith, |p| p.at_sym("<<") || p.at_sym(">>"))
    }

    fn arith(&mut self) -> Result<Item, ParseError> {
        self.binary_chain(Self::term, |p| p.at_sym("+") || p.at_sym("-"))
    }

    fn term(&mut self) -> Result<Item, ParseError> {
        self.binary_chain(Self::factor, |p| {
            p.at_sym("*") || p.at_sym("/") || p.at_sym("//") || p.at_sym("%") || p.at_sym("@")
        })
    }

    fn factor(&mut self) -> Result<Item, ParseError> {
        if self.at_sym("+") || self.at_sym("-") || self.at_sym("~") {
            let op = self.keyword_elem();
            let operand = self.factor()?;
            let el = self.item_elem(operand);
            return Ok(self.push_node(vec![op, el]));
        }
        if self.at_kw("await") {
            let kw = self.keyword_elem();
            let operand = self.factor()?;
            let el = self.item_elem(operand);
            return Ok(self.push_node(vec![kw, el]));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Item, ParseError> {
        let base = self.atom_trailered()?;
        if self.at_sym("**") {
            let base_el = self.item_elem(base);
            let op = self.keyword_elem();
            let exp = self.factor()?;
            let exp_el = self.item_elem(exp);
            return Ok(self.push_node(vec![base_el, op, exp_el]));
        }
        Ok(base)
    }

    fn atom_trailered(&mut self) -> Result<Item, ParseError> {
        let mut cur = self.atom()?;
        loop {
            if self.at_sym(".") {
                let cur_el = self.item_elem(cur);
                let dot = self.keyword_elem();
                if !self.at(LexKind::Name) {
                    return Err(self.error("expected attribute name after '.'"));
                }
                let name = self.leaf_item();
                let name_el = self.item_elem(name);
                cur = self.push_node(vec![cur_el, dot, name_el]);
            } else if self.at_sym("(") {
                let cur_el = self.item_elem(cur);
                let open = self.keyword_elem();
                if self.at_sym(")") {
                    let close = self.expect_sym(")")?;
                    cur = self.push_node(vec![cur_el, open, close]);
                } else {
                    let args = self.arg_list()?;
                    let args_el = self.item_elem(args);
                    let close = self.expect_sym(")")?;
                    cur = self.push_node(vec![cur_el, open, args_el, close]);
                }
            } else if self.at_sym("[") {
                let cur_el = self.item_elem(cur);
                let open = self.keyword_elem();
                let sub = self.subscript_list()?;
                let sub_el = self.item_elem(sub);
                let close = self.expect_sym("]")?;
                cur = self.push_node(vec![cur_el, open, sub_el, close]);
            } else {
                return Ok(cur);
            }
        }
    }

    fn arg_list(&mut self) -> Result<Item, ParseError> {
        let mut els = Vec::new();
        loop {
            let arg = self.argument()?;
            els.push(self.item_elem(arg));
            if self.at_sym(",") {
                els.push(self.keyword_elem());
                if self.at_sym(")") {
                    break;
                }
            } else {
                break;
            }
        }
        Ok(self.finish(els))
    }

    fn argument(&mut self) -> Result<Item, ParseError> {
        if self.at_sym("*") || self.at_sym("**") {
            let star = self.keyword_elem();
            let value = self.ternary()?;
            let el = self.item_elem(value);
            return Ok(self.push_node(vec![star, el]));
        }
        if self.at(LexKind::Name) && self.peek2().map(|t| t.kind == LexKind::Symbol && t.text == "=").unwrap_or(false) {
            let name = self.leaf_item();
            let name_el = self.item_elem(name);
            let eq = self.expect_sym("=")?;
            let value = self.ternary()?;
            let value_el = self.item_elem(value);
            return Ok(self.push_node(vec![name_el, eq, value_el]));
        }
        let value = self.ternary()?;
        if self.at_kw("for") || self.at_kw("async") {
            // Generator expression as a sole call argument.
            let mut els = vec![self.item_elem(value)];
            self.comp_clauses(&mut els)?;
            return Ok(self.push_node(els));
        }
        Ok(value)
    }

    fn subscript_list(&mut self) -> Result<Item, ParseError> {
        let mut els = Vec::new();
        loop {
            let sub = self.subscript()?;
            els.push(self.item_elem(sub));
            if self.at_sym(",") {
                els.push(self.keyword_elem());
                if self.at_sym("]") {
                    break;
                }
            } else {
                break;
            }
        }
        Ok(self.finish(els))
    }

    fn subscript(&mut self) -> Result<Item, ParseError> {
        let mut els = Vec::new();
        if !self.at_sym(":") {
            let lower = self.ternary()?;
            if !self.at_sym(":") {
                return Ok(lower);
            }
            els.push(self.item_elem(lower));
        }
        els.push(self.expect_sym(":")?);
        if !self.at_sym("]") && !self.at_sym(",") && !self.at_sym(":") {
            let upper = self.ternary()?;
            els.push(self.item_elem(upper));
        }
        if self.at_sym(":") {
            els.push(self.keyword_elem());
            if !self.at_sym("]") && !self.at_sym(",") {
                let step = self.ternary()?;
                els.push(self.item_elem(step));
            }
        }
        Ok(self.push_node(els))
    }

    fn comp_clauses(&mut self, els: &mut Vec<Element>) -> Result<(), ParseError> {
        loop {
            if self.at_kw("async") && self.peek2().map(|t| t.text == "for").unwrap_or(false) {
                let async_kw = self.keyword_elem();
                let clause = self.comp_for(vec![async_kw])?;
                els.push(self.item_elem(clause));
            } else if self.at_kw("for") {
                let clause = self.comp_for(Vec::new())?;
                els.push(self.item_elem(clause));
            } else if self.at_kw("if") {
                let if_kw = self.keyword_elem();
                let cond = self.or_test()?;
                let cond_el = self.item_elem(cond);
                let clause = self.push_node(vec![if_kw, cond_el]);
                els.push(self.item_elem(clause));
            } else {
                return Ok(());
            }
        }
    }

    fn comp_for(&mut self, mut els: Vec<Element>) -> Result<Item, ParseError> {
        els.push(self.expect_kw("for")?);
        let targets = self.expr_list(Self::bit_or)?;
        els.push(self.item_elem(targets));
        els.push(self.expect_kw("in")?);
        let iter = self.or_test()?;
        els.push(self.item_elem(iter));
        Ok(self.push_node(els))
    }

    fn atom(&mut self) -> Result<Item, ParseError> {
        match self.peek().kind {
            LexKind::Name => Ok(self.leaf_item()),
            LexKind::Number => Ok(self.leaf_item()),
            LexKind::Str => {
                let first = self.leaf_item();
                if self.at(LexKind::Str) {
                    // Implicit string concatenation.
                    let mut els = vec![self.item_elem(first)];
                    while self.at(LexKind::Str) {
                        let next = self.leaf_item();
                        els.push(self.item_elem(next));
                    }
                    return Ok(self.push_node(els));
                }
                Ok(first)
            }
            LexKind::Keyword => match self.peek().text.as_str() {
                "True" | "False" | "None" => {
                    let kw = self.keyword_elem();
                    Ok(self.push_node(vec![kw]))
                }
                "lambda" => self.lambda(),
                "yield" => self.yield_expr(),
                "not" => self.not_test(),
                "await" => self.factor(),
                other => Err(self.error(format!("unexpected keyword {:?}", other))),
            },
            LexKind::Symbol => match self.peek().text.as_str() {
                "(" => self.paren_atom(),
                "[" => self.bracket_atom(),
                "{" => self.brace_atom(),
                "..." => {
                    let kw = self.keyword_elem();
                    Ok(self.push_node(vec![kw]))
                }
                other => Err(self.error(format!("unexpected token {:?}", other))),
            },
            _ => Err(self.error("unexpected end of input")),
        }
    }

    fn paren_atom(&mut self) -> Result<Item, ParseError> {
        let open = self.keyword_elem();
        if self.at_sym(")") {
            let close = self.expect_sym(")")?;
            return Ok(self.push_node(vec![open, close]));
        }
        let inner = self.paren_inner()?;
        let inner_el = self.item_elem(inner);
        let close = self.expect_sym(")")?;
        Ok(self.push_node(vec![open, inner_el, close]))
    }

    fn paren_inner(&mut self) -> Result<Item, ParseError> {
        if self.at_kw("yield") {
            return self.yield_expr();
        }
        let first = if self.at_sym("*") {
            self.star_or(Self::ternary)?
        } else {
            let e = self.ternary()?;
            if self.at_sym(":=") {
                let e_el = self.item_elem(e);
                let walrus = self.keyword_elem();
                let value = self.ternary()?;
                let value_el = self.item_elem(value);
                self.push_node(vec![e_el, walrus, value_el])
            } else {
                e
            }
        };
        if self.at_kw("for") || (self.at_kw("async") && self.peek2().map(|t| t.text == "for").unwrap_or(false)) {
            let mut els = vec![self.item_elem(first)];
            self.comp_clauses(&mut els)?;
            return Ok(self.push_node(els));
        }
        if self.at_sym(",") {
            let mut els = vec![self.item_elem(first)];
            while self.at_sym(",") {
                els.push(self.keyword_elem());
                if self.at_sym(")") {
                    break;
                }
                let next = self.star_or(Self::ternary)?;
                els.push(self.item_elem(next));
            }
            return Ok(self.push_node(els));
        }
        Ok(first)
    }

    fn bracket_atom(&mut self) -> Result<Item, ParseError> {
        let open = self.keyword_elem();
        if self.at_sym("]") {
            let close = self.expect_sym("]")?;
            return Ok(self.push_node(vec![open, close]));
        }
        let first = self.star_or(Self::ternary)?;
        let mut els = vec![open, self.item_elem(first)];
        if self.at_kw("for") || (self.at_kw("async") && self.peek2().map(|t| t.text == "for").unwrap_or(false)) {
            self.comp_clauses(&mut els)?;
        } else {
            while self.at_sym(",") {
                els.push(self.keyword_elem());
                if self.at_sym("]") {
                    break;
                }
                let next = self.star_or(Self::ternary)?;
                els.push(self.item_elem(next));
            }
        }
        els.push(self.expect_sym("]")?);
        Ok(self.push_node(els))
    }

    fn brace_atom(&mut self) -> Result<Item, ParseError> {
        let open = self.keyword_elem();
        if self.at_sym("}") {
            let close = self.expect_sym("}")?;
            return Ok(self.push_node(vec![open, close]));
        }
        let first = if self.at_sym("**") {
            let star = self.keyword_elem();
            let value = self.ternary()?;
            let el = self.item_elem(value);
            self.push_node(vec![star, el])
        } else {
            let key = self.ternary()?;
            if self.at_sym(":") {
                let key_el = self.item_elem(key);
                let colon = self.keyword_elem();
                let value = self.ternary()?;
                let value_el = self.item_elem(value);
                self.push_node(vec![key_el, colon, value_el])
            } else {
                key
            }
        };
        let mut els = vec![open, self.item_elem(first)];
        if self.at_kw("for") || (self.at_kw("async") && self.peek2().map(|t| t.text == "for").unwrap_or(false)) {
            self.comp_clauses(&mut els)?;
        } else {
            while self.at_sym(",") {
                els.push(self.keyword_elem());
                if self.at_sym("}") {
                    break;
                }
                let next = if self.at_sym("**") {
                    let star = self.keyword_elem();
                    let value = self.ternary()?;
                    let el = self.item_elem(value);
                    self.push_node(vec![star, el])
                } else {
                    let key = self.ternary()?;
                    if self.at_sym(":") {
                        let key_el = self.item_elem(key);
                        let colon = self.keyword_elem();
                        let value = self.ternary()?;
                        let value_el = self.item_elem(value);
                        self.push_node(vec![key_el, colon, value_el])
                    } else {
                        key
                    }
                };
                els.push(self.item_elem(next));
            }
        }
        els.push(self.expect_sym("}")?);
        Ok(self.push_node(els))
    }
}

// ---------------------------------------------------------------------------
// Method extraction
// ---------------------------------------------------------------------------

/// Pulls the outermost `def`s (module-level functions and class methods)
/// out of a file. The decorator lines directly above a definition belong to
/// its record. Functions nested inside another function are not extracted.
pub fn extract_methods(path: &str, file_source: &str) -> Vec<MethodSource> {
    let lines = split_lines(file_source);
    let logical = logical_line_flags(file_source, &lines);
    let mut out = Vec::new();
    // Active definition scopes: (indent, is_def, name).
    let mut scopes: Vec<(usize, bool, String)> = Vec::new();
    let mut i = 0usize;
    while i < lines.len() {
        let (start, end) = lines[i];
        let text = &file_source[start..end];
        let trimmed = text.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') || !logical[i] {
            i += 1;
            continue;
        }
        let indent = text.len() - trimmed.len();
        while let Some(&(scope_indent, _, _)) = scopes.last() {
            if indent <= scope_indent {
                scopes.pop();
            } else {
                break;
            }
        }
        let inside_def = scopes.iter().any(|(_, is_def, _)| *is_def);
        let def_name = def_line_name(trimmed);
        if let Some(name) = def_name {
            if inside_def {
                scopes.push((indent, true, name));
                i += 1;
                continue;
            }
            // Decorators directly above at the same indent join the record.
            let mut first = i;
            while first > 0 {
                let (ps, pe) = lines[first - 1];
                let prev = &file_source[ps..pe];
                let prev_trim = prev.trim_start();
                if logical[first - 1]
                    && prev_trim.starts_with('@')
                    && prev.len() - prev_trim.len() == indent
                {
                    first -= 1;
                } else {
                    break;
                }
            }
            // Block ends before the next logical line at indent <= def indent.
            let mut last = i;
            let mut j = i + 1;
            while j < lines.len() {
                let (ls, le) = lines[j];
                let ltext = &file_source[ls..le];
                let ltrim = ltext.trim_start();
                if ltrim.is_empty() || ltrim.starts_with('#') {
                    j += 1;
                    continue;
                }
                if logical[j] && ltext.len() - ltrim.len() <= indent {
                    break;
                }
                last = j;
                j += 1;
            }
            let span_start = lines[first].0;
            let span_end = lines[last].1;
            let qualified = match scopes.iter().rev().find(|(_, is_def, _)| !is_def) {
                Some((_, _, class_name)) => format!("{}.{}", class_name, name),
                None => name.clone(),
            };
            out.push(MethodSource {
                path: path.to_string(),
                name: qualified,
                line: first + 1,
                source: file_source[span_start..span_end].to_string(),
            });
            scopes.push((indent, true, name));
            i += 1;
            continue;
        }
        if let Some(name) = class_line_name(trimmed) {
            scopes.push((indent, false, name));
        }
        i += 1;
    }
    out
}

fn def_line_name(trimmed: &str) -> Option<String> {
    let rest = trimmed
        .strip_prefix("async ")
        .map(str::trim_start)
        .unwrap_or(trimmed);
    let rest = rest.strip_prefix("def")?;
    let rest = rest.strip_prefix(|c: char| c.is_whitespace())?;
    let name: String = rest.chars().take_while(|&c| is_ident_continue(c)).collect();
    if name.is_empty() {
        None
    } else {
        Some(name)
    }
}

fn class_line_name(trimmed: &str) -> Option<String> {
    let rest = trimmed.strip_prefix("class")?;
    let rest = rest.strip_prefix(|c: char| c.is_whitespace())?;
    let name: String = rest.chars().take_while(|&c| is_ident_continue(c)).collect();
    if name.is_empty() {
        None
    } else {
        Some(name)
    }
}

/// `(start, end)` byte ranges of each physical line, end excluding the
/// newline itself but the range `[start, end_with_newline)` is implied by
/// the next line's start.
fn split_lines(source: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0usize;
    for (i, b) in source.bytes().enumerate() {
        if b == b'\n' {
            out.push((start, i + 1));
            start = i + 1;
        }
    }
    if start < source.len() {
        out.push((start, source.len()));
    }
    out
}

/// Marks the physical lines that begin a logical line, i.e. are not a
/// continuation inside brackets, after a backslash, or inside a
/// triple-quoted string.
fn logical_line_flags(source: &str, lines: &[(usize, usize)]) -> Vec<bool> {
    let mut flags = vec![true; lines.len()];
    let bytes = source.as_bytes();
    let mut depth = 0usize;
    let mut in_string: Option<(u8, bool)> = None; // (quote, triple)
    let mut backslash = false;
    for (idx, &(start, end)) in lines.iter().enumerate() {
        flags[idx] = depth == 0 && in_string.is_none() && !backslash;
        backslash = false;
        let mut i = start;
        while i < end {
            let b = bytes[i];
            if let Some((quote, triple)) = in_string {
                if b == b'\\' {
                    i += 2;
                    continue;
                }
                if b == quote {
                    if triple {
                        if i + 2 < end && bytes[i + 1] == quote && bytes[i + 2] == quote {
                            in_string = None;
                            i += 3;
                            continue;
                        }
                    } else {
                        in_string = None;
                    }
                }
                i += 1;
                continue;
            }
            match b {
                b'#' => break,
                b'\'' | b'"' => {
                    let triple = i + 2 < end && bytes[i + 1] == b && bytes[i + 2] == b;
                    in_string = Some((b, triple));
                    i += if triple { 3 } else { 1 };
                    continue;
                }
                b'(' | b'[' | b'{' => depth += 1,
                b')' | b']' | b'}' => depth = depth.saturating_sub(1),
                b'\\' if i + 1 >= end || bytes[i + 1] == b'\n' || bytes[i + 1] == b'\r' => {
                    backslash = true;
                }
                _ => {}
            }
            i += 1;
        }
        if let Some((_, false)) = in_string {
            // Unterminated single-quoted string: do not leak into the next line.
            in_string = None;
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::verify_round_trip;

    fn parse(source: &str) -> SimplifiedParseTree {
        let adapter = PythonAdapter;
        let src = MethodSource {
            path: "test.py".into(),
            name: "t".into(),
            line: 1,
            source: source.to_string(),
        };
        let tree = adapter.parse_method(&src).expect("parse");
        let violations = tree.validate();
        assert!(violations.is_empty(), "{source:?}: {violations:?}");
        verify_round_trip(&tree, "#").expect("round trip");
        tree
    }

    #[test]
    fn smallest_call_form() {
        let tree = parse("f(x)");
        assert_eq!(tree.label(tree.root()), "#(#)");
        let texts: Vec<&str> = tree.token_stream().iter().map(|t| t.text).collect();
        assert_eq!(texts, vec!["f", "(", "x", ")"]);
    }

    #[test]
    fn with_block_has_expected_shape() {
        let tree = parse("with open(self.output_path, 'w') as f:\n    json.dump(data, f)\n");
        assert_eq!(tree.label(tree.root()), "with#:#");
        let first: Vec<&str> = tree
            .token_stream()
            .iter()
            .take(3)
            .map(|t| t.text)
            .collect();
        assert_eq!(first, vec!["with", "open", "("]);
        // The as-clause nests the call, `as`, and the name.
        let as_node = tree.child_at(tree.root(), 1).unwrap();
        match as_node {
            TreeRef::Node(n) => assert_eq!(tree.label(n), "#as#"),
            TreeRef::Leaf { .. } => panic!("expected node"),
        }
    }

    #[test]
    fn dotted_call_nests_callee() {
        let tree = parse("json.dump(data, f)");
        assert_eq!(tree.label(tree.root()), "#(#)");
        let callee = tree.child_at(tree.root(), 1).unwrap();
        match callee {
            TreeRef::Node(n) => assert_eq!(tree.label(n), "#.#"),
            TreeRef::Leaf { .. } => panic!("expected node"),
        }
        let args = tree.child_at(tree.root(), 2).unwrap();
        match args {
            TreeRef::Node(n) => assert_eq!(tree.label(n), "#,#"),
            TreeRef::Leaf { .. } => panic!("expected node"),
        }
    }

    #[test]
    fn empty_source_is_a_parse_failure() {
        let adapter = PythonAdapter;
        let src = MethodSource {
            path: "test.py".into(),
            name: "t".into(),
            line: 1,
            source: String::new(),
        };
        assert!(adapter.parse_method(&src).is_err());
    }

    #[test]
    fn def_with_body_round_trips() {
        let tree = parse(
            "def save(self, data):\n    with open(self.output_path, 'w') as f:\n        json.dump(data, f)\n",
        );
        assert_eq!(tree.label(tree.root()), "def#(#):#");
    }

    #[test]
    fn indented_method_parses_without_dedent() {
        let tree = parse("    def get(self):\n        return self.value\n");
        assert_eq!(tree.label(tree.root()), "def#(#):#");
    }

    #[test]
    fn statements_cover_grammar_subset() {
        for src in [
            "x = 1\n",
            "x += 2\n",
            "x, y = y, x\n",
            "x: int = 5\n",
            "a = b = c\n",
            "del cache[key]\n",
            "assert x > 0, 'must be positive'\n",
            "global counter\n",
            "import os\n",
            "import os.path as osp, sys\n",
            "from os.path import join, exists\n",
            "from . import utils\n",
            "raise ValueError('bad') from err\n",
            "return [y for y in xs if y]\n",
            "yield from items\n",
            "result = {k: v for k, v in pairs}\n",
            "s = {1, 2, 3}\n",
            "t = (1,)\n",
            "n = -x ** 2\n",
            "flag = not done and ready or forced\n",
            "v = a if cond else b\n",
            "fn = lambda a, b=2: a + b\n",
            "data = f'{x} items'\n",
            "chunk = buf[1:-1]\n",
            "m = grid[i][j]\n",
            "print(*args, **kwargs)\n",
            "if x:\n    pass\nelif y:\n    pass\nelse:\n    pass\n",
            "while True:\n    break\nelse:\n    pass\n",
            "for i in range(3):\n    continue\n",
            "try:\n    risky()\nexcept ValueError as e:\n    handle(e)\nfinally:\n    close()\n",
            "with open(p) as f, open(q) as g:\n    copy(f, g)\n",
            "@cached\ndef helper():\n    return 1\n",
            "async def fetch(url):\n    return await session.get(url)\n",
            "class Point(Base):\n    def norm(self):\n        return self.x ** 2\n",
            "total = sum(len(w) for w in words)\n",
            "x = call(a)(b)\n",
            "keep = value is not None\n",
            "found = name not in seen\n",
            "if (n := len(items)) > 10:\n    trim(items, n)\n",
            "s = 'a' 'b'\n",
            "x = 0x1F + 0b10 + 1_000 + 1.5e-3 + 2j\n",
            "long = (1 +\n        2)\n",
            "cont = 1 + \\\n    2\n",
        ] {
            parse(src);
        }
    }

    #[test]
    fn parse_expression_unwraps_bare_identifier() {
        let adapter = PythonAdapter;
        let (tree, at) = adapter.parse_expression("write").unwrap();
        assert!(matches!(at, TreeRef::Leaf { .. }));
        assert_eq!(tree.leaf_token(at).unwrap().text, "write");

        let (tree, at) = adapter.parse_expression("json.dump").unwrap();
        match at {
            TreeRef::Node(n) => assert_eq!(tree.label(n), "#.#"),
            TreeRef::Leaf { .. } => panic!("expected node"),
        }

        assert!(adapter.parse_expression("foo(").is_err());
        assert!(adapter.parse_expression("a = b").is_err());
    }

    #[test]
    fn extract_outermost_methods_only() {
        let file = "\
import os

def outer(x):
    def inner(y):
        return y + 1
    return inner(x)

class Writer:
    @property
    def path(self):
        return self._path

    def save(self, data):
        with open(self._path, 'w') as f:
            f.write(data)

def main():
    w = Writer()
    w.save('done')
";
        let methods = extract_methods("m.py", file);
        let names: Vec<&str> = methods.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, vec!["outer", "Writer.path", "Writer.save", "main"]);
        assert_eq!(methods[0].line, 3);
        // Decorator included in the record.
        assert!(methods[1].source.starts_with("    @property"));
        // Nested def stays in the parent source.
        assert!(methods[0].source.contains("def inner"));
        for m in &methods {
            let adapter = PythonAdapter;
            let tree = adapter.parse_method(m).expect("method parses");
            assert!(tree.validate().is_empty());
        }
    }

    #[test]
    fn triple_quoted_strings_round_trip() {
        parse("def doc():\n    s = \"\"\"multi\n    line\"\"\"\n    return s\n");
    }
}
